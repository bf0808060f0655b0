use std::fmt::Write as _;

use canosc::bisect::SearchPolicy;
use canosc::bounds::{self, TailPolicy};
use canosc::prufer;
use canosc::schrodinger::{self, NegativeSpectrum, SchrodingerPolicy};
use canosc::spectrum::{self, ClassifyPolicy, VerdictKind};
use canosc::{verify as suite, StepPolicy};
use serde_json::{json, Value};

use crate::config::{build_system, ExperimentConfig, TraceKind};
use crate::report::{to_value, Outcome, SystemReport};
use crate::{CliError, EXIT_CONSISTENCY, EXIT_INCONCLUSIVE, EXIT_OK};

fn search_policy(cfg: &ExperimentConfig) -> SearchPolicy {
    let mut s = SearchPolicy::default();
    if let Some(r) = cfg.resolution {
        s.rel_resolution = r;
    }
    if let Some(lo) = cfg.t_min {
        s.t_min = lo;
    }
    if let Some(hi) = cfg.t_max {
        s.t_max = hi;
    }
    s
}

fn classify_policy(cfg: &ExperimentConfig) -> ClassifyPolicy {
    let mut p = ClassifyPolicy {
        search: search_policy(cfg),
        ..ClassifyPolicy::default()
    };
    if let Some(h) = cfg.log_horizon {
        p.log_horizon = h;
    }
    if let Some(th) = cfg.theta0 {
        p.theta0 = th;
    }
    p
}

fn schrodinger_policy(cfg: &ExperimentConfig) -> SchrodingerPolicy {
    let mut p = SchrodingerPolicy {
        search: search_policy(cfg),
        ..SchrodingerPolicy::default()
    };
    if let Some(x) = cfg.x_max {
        p.x_max = x;
    }
    p
}

fn inconclusive_warnings(label: &str, probes: &[f64]) -> Option<String> {
    (!probes.is_empty()).then(|| format!("{label}: inconclusive probes at t = {probes:?}"))
}

pub fn classify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (field, notes) = build_system(&cfg.system)?;
    let t = cfg.signed_t()?;
    let policy = classify_policy(cfg);
    let v = spectrum::classify(&field, t, &policy)?;
    let exit_code = if v.kind == VerdictKind::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let summary = format!(
        "{} at t = {t}: {:?} ({}; {} crossings at the last window)",
        field.label(),
        v.kind,
        v.evidence.reason,
        v.evidence.crossings_final
    );
    Ok(Outcome {
        system: Some(SystemReport::new(&cfg.system, &field)),
        result: to_value(&v),
        policy: to_value(&policy),
        notes,
        warnings: Vec::new(),
        summary,
        exit_code,
    })
}

pub fn estimate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (field, notes) = build_system(&cfg.system)?;
    let policy = classify_policy(cfg);
    let e = spectrum::m_estimate(&field, &policy)?;
    let warnings = [
        inconclusive_warnings("plus", &e.plus.inconclusive()),
        inconclusive_warnings("minus", &e.minus.inconclusive()),
    ]
    .into_iter()
    .flatten()
    .collect();
    let summary = format!(
        "{}: M in {} (m+ in {}, m- in {}); zero in essential spectrum: {:?}",
        field.label(),
        e.m,
        e.m_plus,
        e.m_minus,
        e.zero_in_ess
    );
    Ok(Outcome {
        system: Some(SystemReport::new(&cfg.system, &field)),
        result: to_value(&e),
        policy: to_value(&policy),
        notes,
        warnings,
        summary,
        exit_code: EXIT_OK,
    })
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (field, notes) = build_system(&cfg.system)?;
    let cp = classify_policy(cfg);
    let sp = schrodinger_policy(cfg);
    let tp = TailPolicy {
        use_exact: !cfg.quadrature.unwrap_or(false),
        ..TailPolicy::default()
    };
    let stats = bounds::tail_stats(&field, &tp)?;
    let est = spectrum::m_estimate(&field, &cp)?;
    let diag = if field.is_diagonal() {
        None
    } else {
        Some(spectrum::m_estimate(&field.diagonal_part(), &cp)?)
    };
    let s = schrodinger::s_bracket(&field, &sp)?;
    let report = bounds::consistency_report(&field, &est, diag.as_ref(), &s.bracket, &stats)?;

    let mut warnings: Vec<String> = [
        inconclusive_warnings("plus", &est.plus.inconclusive()),
        inconclusive_warnings("minus", &est.minus.inconclusive()),
        inconclusive_warnings("schrodinger", &s.inconclusive()),
    ]
    .into_iter()
    .flatten()
    .collect();
    warnings.extend(stats.notes.iter().cloned());

    let mut summary = format!(
        "{}: M in {}, S in {}, A = {}, B = {}",
        field.label(),
        est.m,
        s.bracket,
        stats.a_hat,
        stats.b_hat
    );
    if report.discrete_spectrum {
        summary.push_str("; discrete spectrum");
    }
    for c in &report.checks {
        let _ = write!(
            summary,
            "\n  {} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let result = json!({
        "estimate": to_value(&est),
        "diagonal_estimate": diag.as_ref().map(to_value),
        "s": to_value(&s),
        "tail": to_value(&stats),
        "thm13": to_value(&report.thm13),
        "thm14_upper": to_value(&ExtReal(report.thm14_upper)),
        "thm11": to_value(&report.thm11),
        "discrete_spectrum": report.discrete_spectrum,
        "consistency": to_value(&report),
    });
    Ok(Outcome {
        system: Some(SystemReport::new(&cfg.system, &field)),
        result,
        policy: json!({ "classify": to_value(&cp), "schrodinger": to_value(&sp), "tail": to_value(&tp) }),
        notes,
        warnings,
        summary,
        exit_code: if report.all_passed {
            EXIT_OK
        } else {
            EXIT_CONSISTENCY
        },
    })
}

/// Serializes infinity as `"inf"` like the library's extended reals.
struct ExtReal(f64);

impl serde::Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

pub fn schrodinger(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (field, notes) = build_system(&cfg.system)?;
    let policy = schrodinger_policy(cfg);
    let system = Some(SystemReport::new(&cfg.system, &field));
    if let Some(t) = cfg.t {
        let v = schrodinger::negative_spectrum_finite(&field, t, &policy)?;
        let summary = format!(
            "{} at t = {t}: negative spectrum {:?} ({})",
            field.label(),
            v.kind,
            v.reason
        );
        let exit_code = if v.kind == NegativeSpectrum::Inconclusive {
            EXIT_INCONCLUSIVE
        } else {
            EXIT_OK
        };
        return Ok(Outcome {
            system,
            result: to_value(&v),
            policy: to_value(&policy),
            notes,
            warnings: Vec::new(),
            summary,
            exit_code,
        });
    }
    let s = schrodinger::s_bracket(&field, &policy)?;
    let warnings = inconclusive_warnings("schrodinger", &s.inconclusive())
        .into_iter()
        .collect();
    Ok(Outcome {
        system,
        summary: format!("{}: S in {}", field.label(), s.bracket),
        result: to_value(&s),
        policy: to_value(&policy),
        notes,
        warnings,
        exit_code: EXIT_OK,
    })
}

pub fn trace(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (field, notes) = build_system(&cfg.system)?;
    let t = cfg.signed_t()?;
    let horizon = cfg
        .horizon
        .ok_or_else(|| CliError::Config("trace needs a horizon".into()))?;
    let path = cfg
        .csv
        .clone()
        .ok_or_else(|| CliError::Config("trace needs a csv output path".into()))?;
    let kind = cfg.kind.unwrap_or(TraceKind::Prufer);
    let step = match kind {
        TraceKind::Prufer => StepPolicy::default(),
        TraceKind::ZeroCount => SchrodingerPolicy::default().step,
    };
    let (csv, result, summary) = match kind {
        TraceKind::Prufer => {
            let theta0 = cfg.theta0.unwrap_or(0.0);
            let traj = prufer::integrate(&field, t, theta0, 0.0, horizon, &step)?;
            let last = traj.samples.last().map(|s| s.theta).unwrap_or(theta0);
            let result = json!({
                "kind": kind,
                "t": t,
                "theta0": theta0,
                "horizon": horizon,
                "csv": path,
                "rows": traj.samples.len(),
                "final_theta": last,
                "rotations": prufer::rotation_count(&traj),
                "step_stats": to_value(&traj.step_stats),
            });
            let summary = format!("{} at t = {t}: theta({horizon}) = {last:.9}", field.label());
            (prufer::trajectory_csv(&traj), result, summary)
        }
        TraceKind::ZeroCount => {
            let run = schrodinger::shoot_zero_energy(&field, t, horizon, &step)?;
            let result = json!({
                "kind": kind,
                "t": t,
                "horizon": horizon,
                "csv": path,
                "rows": run.zero_counts.len(),
                "final_count": run.final_count(),
                "step_stats": to_value(&run.step_stats),
            });
            let summary = format!(
                "{} at t = {t}: {} zeros up to X = {horizon}",
                field.label(),
                run.final_count()
            );
            (run.to_csv(), result, summary)
        }
    };
    std::fs::write(&path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Outcome {
        system: Some(SystemReport::new(&cfg.system, &field)),
        result,
        policy: json!({ "step": to_value(&step) }),
        notes,
        warnings: Vec::new(),
        summary,
        exit_code: EXIT_OK,
    })
}

pub fn verify(deterministic: bool) -> Outcome {
    let results = suite::run_all();
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.as_str())
        .collect();
    let mut summary = String::new();
    for r in &results {
        let _ = writeln!(
            summary,
            "{} {} {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let mut result = to_value(&results);
    if deterministic {
        if let Value::Array(items) = &mut result {
            for item in items {
                if let Value::Object(m) = item {
                    m.remove("seconds");
                }
            }
        }
    }
    Outcome {
        system: None,
        result,
        policy: Value::Null,
        notes: Vec::new(),
        warnings: Vec::new(),
        summary: summary.trim_end().to_string(),
        exit_code: if failed.is_empty() {
            EXIT_OK
        } else {
            EXIT_CONSISTENCY
        },
    }
}
