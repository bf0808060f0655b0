mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, SignArg, SystemConfig, TraceKind};
use report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_CONSISTENCY: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] canosc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use canosc::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                E::StepUnderflow { .. }
                | E::StepBudget { .. }
                | E::NonFinite { .. }
                | E::AllInconclusive(_)
                | E::Divergent(_)
                | E::SolutionVanishes { .. } => EXIT_INCONCLUSIVE,
                _ => EXIT_CONFIG,
            },
        }
    }
}

/// Essential-spectrum edge estimates for half-line canonical systems.
#[derive(Debug, Parser)]
#[command(name = "canosc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Oscillation verdict at one coupling t.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_enum)]
        sign: Option<SignArg>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long)]
        log_horizon: Option<f64>,
    },
    /// Brackets for the oscillation thresholds and M(H).
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        log_horizon: Option<f64>,
    },
    /// Tail integrals, the bounds they imply, the Schrödinger threshold and
    /// consistency checks.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        x_max: Option<f64>,
        /// Integrate the tail numerically even when a closed form exists.
        #[arg(long)]
        quadrature: bool,
    },
    /// Schrödinger zero-energy probe: a verdict at t, or the threshold bracket.
    Schrodinger {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
    },
    /// Writes a plot-ready CSV trace.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_enum)]
        sign: Option<SignArg>,
        #[arg(long, value_enum)]
        kind: Option<TraceKind>,
        /// End of the trace.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Runs the acceptance suite.
    Verify {
        #[arg(long)]
        deterministic: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file, or `-` for stdin.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    /// CSV sample table `x,phi,g[,trace]`.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Declare e1 square integrable (grid systems).
    #[arg(long)]
    l2: bool,
    /// Omit timing information so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Search {
    /// Relative bracket resolution.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
}

impl Common {
    fn flags(&self) -> ExperimentConfig {
        let mut params = std::collections::BTreeMap::new();
        for (k, v) in [
            ("c", self.c),
            ("p", self.p),
            ("g", self.g),
            ("phi", self.phi),
        ] {
            if let Some(v) = v {
                params.insert(k.to_string(), v);
            }
        }
        ExperimentConfig {
            system: SystemConfig {
                family: self.family.clone(),
                params,
                grid: self.grid.clone(),
                l2: self.l2,
            },
            output: self.output.clone(),
            ..ExperimentConfig::default()
        }
    }

    fn resolve(&self, mut flags: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let common = self.flags();
        flags.system = common.system;
        flags.output = common.output;
        let cfg = base.overlay(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Search {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.resolution = self.resolution;
        cfg.t_min = self.t_min;
        cfg.t_max = self.t_max;
    }
}

fn run(cmd: Command) -> Result<(Report, Option<PathBuf>, String), CliError> {
    let start = Instant::now();
    let (name, deterministic, cfg_or_verify) = match cmd {
        Command::Classify {
            common,
            t,
            sign,
            theta0,
            log_horizon,
        } => {
            let flags = ExperimentConfig {
                t,
                sign,
                theta0,
                log_horizon,
                ..Default::default()
            };
            (
                "classify",
                common.deterministic,
                Some(common.resolve(flags)?),
            )
        }
        Command::Estimate {
            common,
            search,
            log_horizon,
        } => {
            let mut flags = ExperimentConfig {
                log_horizon,
                ..Default::default()
            };
            search.apply(&mut flags);
            (
                "estimate",
                common.deterministic,
                Some(common.resolve(flags)?),
            )
        }
        Command::Bounds {
            common,
            search,
            x_max,
            quadrature,
        } => {
            let mut flags = ExperimentConfig {
                x_max,
                quadrature: quadrature.then_some(true),
                ..Default::default()
            };
            search.apply(&mut flags);
            ("bounds", common.deterministic, Some(common.resolve(flags)?))
        }
        Command::Schrodinger {
            common,
            search,
            t,
            x_max,
        } => {
            let mut flags = ExperimentConfig {
                t,
                x_max,
                ..Default::default()
            };
            search.apply(&mut flags);
            (
                "schrodinger",
                common.deterministic,
                Some(common.resolve(flags)?),
            )
        }
        Command::Trace {
            common,
            t,
            sign,
            kind,
            horizon,
            theta0,
            csv,
        } => {
            let flags = ExperimentConfig {
                t,
                sign,
                kind,
                horizon,
                theta0,
                csv,
                ..Default::default()
            };
            ("trace", common.deterministic, Some(common.resolve(flags)?))
        }
        Command::Verify {
            deterministic,
            output,
        } => {
            let out = commands::verify(deterministic);
            let summary = out.summary.clone();
            let report =
                Report::assemble("verify", out, deterministic, start.elapsed().as_secs_f64());
            return Ok((report, output, summary));
        }
    };
    let cfg = cfg_or_verify.expect("set for every command but verify");
    let out = match name {
        "classify" => commands::classify(&cfg)?,
        "estimate" => commands::estimate(&cfg)?,
        "bounds" => commands::bounds(&cfg)?,
        "schrodinger" => commands::schrodinger(&cfg)?,
        _ => commands::trace(&cfg)?,
    };
    let summary = out.summary.clone();
    let report = Report::assemble(name, out, deterministic, start.elapsed().as_secs_f64());
    Ok((report, cfg.output.clone(), summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok((report, output, summary)) => match report.emit(output.as_deref()) {
            Ok(()) => {
                let mut err = std::io::stderr().lock();
                let _ = writeln!(err, "{summary}");
                for w in &report.diagnostics.warnings {
                    let _ = writeln!(err, "warning: {w}");
                }
                report.diagnostics.exit_code
            }
            Err(e) => {
                let _ = writeln!(std::io::stderr(), "error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
