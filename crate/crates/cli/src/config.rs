//! Experiment configuration: one JSON document, overridden by flags.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use canosc::model::GridTable;
use canosc::{builtin_family, CoefficientField, FamilyParams};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    /// CSV with columns `x,phi,g[,trace]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
    /// Declare `e1` square integrable (grid systems only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub l2: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// Prüfer angle, columns `x,theta`.
    Prufer,
    /// Zero count of the Schrödinger solution, columns `X,count`.
    ZeroCount,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_horizon: Option<f64>,
    /// End of a trace, in the field's own variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Force quadrature for the tail integrals even when a closed form exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<TraceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

macro_rules! take {
    ($base:ident, $over:ident, $($f:ident),*) => {
        $(if $over.$f.is_some() { $base.$f = $over.$f.clone(); })*
    };
}

impl ExperimentConfig {
    /// Reads a config from `path`, or from stdin when `path` is `-`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = if path.as_os_str() == "-" {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            s
        } else {
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        };
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` win. A system source given by flags replaces
    /// the file's source.
    pub fn overlay(mut self, flags: ExperimentConfig) -> Self {
        let f = flags.system;
        if f.family.is_some() || f.grid.is_some() {
            if f.family != self.system.family {
                self.system.params.clear();
            }
            self.system.family = f.family;
            self.system.grid = f.grid;
        }
        self.system.params.extend(f.params);
        self.system.l2 |= f.l2;
        take!(
            self,
            flags,
            t,
            sign,
            theta0,
            log_horizon,
            horizon,
            x_max,
            resolution,
            t_min,
            t_max,
            quadrature,
            kind,
            csv,
            output
        );
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let checks: [(&str, Option<f64>, fn(f64) -> bool, &str); 8] = [
            (
                "t",
                self.t,
                |v| v >= 0.0,
                ">= 0 (use sign for negative coupling)",
            ),
            ("theta0", self.theta0, |_| true, "finite"),
            (
                "log_horizon",
                self.log_horizon,
                |v| v > 0.0 && v <= 600.0,
                "in (0, 600]",
            ),
            ("horizon", self.horizon, |v| v > 0.0, "> 0"),
            ("x_max", self.x_max, |v| v > 16.0, "> 16"),
            (
                "resolution",
                self.resolution,
                |v| v > 0.0 && v <= 1.0,
                "in (0, 1]",
            ),
            ("t_min", self.t_min, |v| v > 0.0, "> 0"),
            ("t_max", self.t_max, |v| v > 0.0, "> 0"),
        ];
        for (name, value, ok, expected) in checks {
            if let Some(v) = value {
                if !v.is_finite() || !ok(v) {
                    return Err(CliError::Config(format!(
                        "{name} = {v} must be finite and {expected}"
                    )));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.t_min, self.t_max) {
            if lo >= hi {
                return Err(CliError::Config(format!(
                    "t_min = {lo} must be below t_max = {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn signed_t(&self) -> Result<f64, CliError> {
        let t = self
            .t
            .ok_or_else(|| CliError::Config("this command needs t".into()))?;
        Ok(match self.sign {
            Some(SignArg::Minus) => -t,
            _ => t,
        })
    }
}

/// The field described by `sys`, plus notes for the report.
pub fn build_system(sys: &SystemConfig) -> Result<(CoefficientField, Vec<String>), CliError> {
    let field = match (&sys.family, &sys.grid) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either a family or a grid file, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "no system: give a family or a grid file".into(),
            ))
        }
        (None, Some(path)) => {
            if !sys.params.is_empty() {
                return Err(CliError::Config("grid systems take no parameters".into()));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let grid = GridTable::from_csv(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let params = FamilyParams {
                grid: Some(grid),
                l2: sys.l2,
                ..FamilyParams::new()
            };
            builtin_family("grid_sampled", &params)?
        }
        (Some(name), None) => {
            if sys.l2 {
                return Err(CliError::Config("l2 applies to grid systems only".into()));
            }
            let params = FamilyParams {
                values: sys.params.clone(),
                ..FamilyParams::new()
            };
            builtin_family(name, &params)?
        }
    };
    let mut notes = Vec::new();
    let auto_normalize = matches!(
        sys.family.as_deref(),
        Some("section5" | "section5_diagonal")
    );
    if auto_normalize && !field.trace_normed() {
        notes.push(
            "trace normalized automatically: positions are arclength s = 2 sinh x, not x"
                .to_string(),
        );
        return Ok((field.trace_normalize(), notes));
    }
    Ok((field, notes))
}
