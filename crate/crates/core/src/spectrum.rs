//! Oscillation verdicts at fixed `t` and brackets for the thresholds
//! `M₊`, `M₋` and `M = min(M₊, M₋)`.

use serde::{Deserialize, Serialize};

use crate::bisect::{self, Probe, SearchPolicy, ThresholdResult};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::model::CoefficientField;
use crate::ode::{StepPolicy, StepStats};
use crate::prufer::LongRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Oscillatory,
    NonOscillatory,
    Inconclusive,
}

/// Progress over one horizon window `[s_{k-1}, s_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub s_end: f64,
    /// Zeros of the first solution component (in the L² frame) in the window.
    pub crossings: u64,
    pub theta_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Arclength reached.
    pub horizon: f64,
    pub crossings_final: u64,
    /// θ gain over the final window divided by π.
    pub rotations_final: f64,
    pub certificate: bool,
    pub windows: Vec<WindowRecord>,
    pub reason: String,
    pub steps: StepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationVerdict {
    pub t: f64,
    pub kind: VerdictKind,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyPolicy {
    /// Final horizon as `ln(1 + s_max)`.
    pub log_horizon: f64,
    /// Number of windows; window `k` ends at `log_horizon / 2^(windows-1-k)`.
    pub windows: usize,
    /// Crossings needed in the deciding window for an oscillatory verdict.
    pub min_crossings: u64,
    /// Allowed shortfall of a window's crossing count below twice the count
    /// of the window before it.
    pub rate_slack: u64,
    /// Largest θ gain over a window that still counts as a plateau.
    pub plateau_gain: f64,
    pub theta0: f64,
    pub step: StepPolicy,
    pub search: SearchPolicy,
}

impl Default for ClassifyPolicy {
    fn default() -> Self {
        ClassifyPolicy {
            log_horizon: 300.0,
            windows: 10,
            min_crossings: 4,
            rate_slack: 1,
            plateau_gain: 1e-4,
            theta0: 0.0,
            step: StepPolicy {
                max_steps: 2_000_000,
                ..StepPolicy::default()
            },
            search: SearchPolicy::default(),
        }
    }
}

impl ClassifyPolicy {
    pub fn s_max(&self) -> f64 {
        self.log_horizon.exp_m1()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.log_horizon > 0.0 && self.log_horizon <= 600.0) {
            return Err(Error::InvalidParam(format!(
                "log horizon {} must lie in (0, 600]",
                self.log_horizon
            )));
        }
        if self.windows < 3 {
            return Err(Error::InvalidParam("at least 3 windows are needed".into()));
        }
        if !(self.plateau_gain > 0.0) {
            return Err(Error::InvalidParam("plateau gain must be positive".into()));
        }
        self.step.validate()?;
        self.search.validate()
    }

    fn window_ends(&self) -> Vec<f64> {
        let k_last = self.windows - 1;
        (0..self.windows)
            .map(|k| self.log_horizon / 2f64.powi((k_last - k) as i32))
            .collect()
    }
}

/// Non-oscillation certificate at `t` for the tail past arclength `a`.
///
/// A diagonal system is non-oscillatory once `t² sup_{s>=a} s W(s) < 1/4`;
/// a general one once the same holds at `2t`, since `e^*He <= 2 e^*H_d e`.
pub fn tail_certificate(field: &CoefficientField, t: f64, a: f64) -> bool {
    if field.l2_direction_ok() && field.support_end().is_some_and(|end| a >= end) {
        return true;
    }
    let Some(tail) = field.tail() else {
        return false;
    };
    if !field.l2_direction_ok() {
        return false;
    }
    let factor = if field.analysis_is_diagonal() {
        1.0
    } else {
        4.0
    };
    let sup = tail.sup_xw_from(a);
    factor * t * t * sup < 0.25
}

fn grid_verdict(field: &CoefficientField, t: f64) -> OscillationVerdict {
    let grid = field.grid().expect("grid field");
    let last = grid.len() - 1;
    let x_last = grid.starts()[last];
    let m = field.h_at(x_last).expect("grid start lies in the domain");
    let det = m.det();
    let osc = det > 1e-14 * m.trace() * m.trace();
    OscillationVerdict {
        t,
        kind: if osc {
            VerdictKind::Oscillatory
        } else {
            VerdictKind::NonOscillatory
        },
        evidence: Evidence {
            horizon: field.s_of_x(x_last),
            crossings_final: 0,
            rotations_final: 0.0,
            certificate: !osc,
            windows: Vec::new(),
            reason: if osc {
                "the last grid cell has det H > 0, so θ grows linearly".into()
            } else {
                "the last grid cell has det H = 0, so θ converges".into()
            },
            steps: StepStats::default(),
        },
    }
}

const WINDOW_CHUNKS: usize = 16;

/// Windows double in length, so a steady crossing rate doubles the count.
/// `current` is the (possibly partial) count of the window after `done`.
fn steady_rate(done: &[WindowRecord], current: u64, policy: &ClassifyPolicy) -> bool {
    let k = done.len();
    if k < 2 {
        return false;
    }
    let (a, b) = (done[k - 2].crossings, done[k - 1].crossings);
    current >= policy.min_crossings
        && current + policy.rate_slack >= 2 * b
        && b + policy.rate_slack >= 2 * a
}

/// Three-valued oscillation verdict for the angle equation at `t`.
///
/// Oscillatory: the tail certificate fails at the horizon, in some window
/// `k >= 3` there are at least `min_crossings` crossings, and the crossing rate per unit of `ln(1 + s)` has not dropped
/// (up to `rate_slack` crossings) over the last three windows.
/// NonOscillatory: a window with no crossing, θ gain at most
/// `plateau_gain`, and a tail certificate at the horizon reached.
/// Integrator failures give Inconclusive with the error as reason.
pub fn classify(
    field: &CoefficientField,
    t: f64,
    policy: &ClassifyPolicy,
) -> Result<OscillationVerdict> {
    policy.validate()?;
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidParam(format!(
            "t = {t}: need a finite nonzero t"
        )));
    }
    if field.grid().is_some() {
        return Ok(grid_verdict(field, t));
    }
    let mut run = LongRun::new(field, t, policy.theta0, policy.step)?;
    let u_cap = field.s_domain_end().ln_1p();
    let mut windows: Vec<WindowRecord> = Vec::with_capacity(policy.windows);
    let mut prev_cross = run.crossing_index();
    let mut prev_theta = run.theta();
    let mut reason = String::from("horizon exhausted without a decision");
    let mut kind = VerdictKind::Inconclusive;
    let mut certificate = false;
    // a certificate far out rules out oscillation; transient crossings of a
    // slowly decaying tail must then not be read as a steady rate
    let osc_possible = !tail_certificate(field, t, policy.s_max().min(field.s_domain_end()));

    let mut u_start = 0.0;
    'windows: for (k, &u_end) in policy.window_ends().iter().enumerate() {
        let u_end = u_end.min(u_cap);
        // the oscillatory test only gets easier as a window fills up, so it
        // is checked on sub-chunks; exploding rates are caught early
        for j in 1..=WINDOW_CHUNKS {
            let u = u_start + (u_end - u_start) * j as f64 / WINDOW_CHUNKS as f64;
            if let Err(e) = run.advance(u) {
                reason = format!("integration stopped: {e}");
                break 'windows;
            }
            let partial = (run.crossing_index() - prev_cross).abs() as u64;
            if k >= 3 && osc_possible && steady_rate(&windows, partial, policy) {
                let (a, b) = (windows[k - 2].crossings, windows[k - 1].crossings);
                windows.push(WindowRecord {
                    s_end: run.s(),
                    crossings: partial,
                    theta_gain: (run.theta() - prev_theta).abs(),
                });
                kind = VerdictKind::Oscillatory;
                reason = format!(
                    "crossing counts {}, {}, {} in the last three windows keep a steady rate",
                    a, b, partial
                );
                break 'windows;
            }
        }
        u_start = u_end;
        let cross = run.crossing_index();
        let theta = run.theta();
        let rec = WindowRecord {
            s_end: run.s(),
            crossings: (cross - prev_cross).abs() as u64,
            theta_gain: (theta - prev_theta).abs(),
        };
        windows.push(rec);
        prev_cross = cross;
        prev_theta = theta;

        certificate = tail_certificate(field, t, run.s());
        if rec.crossings == 0 && rec.theta_gain <= policy.plateau_gain && certificate {
            kind = VerdictKind::NonOscillatory;
            reason = "θ is flat in the last window and the tail certificate holds".into();
            break;
        }
        if u_end >= u_cap {
            reason = "end of the field's domain reached".into();
            break;
        }
    }
    let last = windows.last().copied().unwrap_or(WindowRecord {
        s_end: 0.0,
        crossings: 0,
        theta_gain: 0.0,
    });
    Ok(OscillationVerdict {
        t,
        kind,
        evidence: Evidence {
            horizon: run.s(),
            crossings_final: last.crossings,
            rotations_final: last.theta_gain / std::f64::consts::PI,
            certificate,
            windows,
            reason,
            steps: run.stats,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

fn to_probe(kind: VerdictKind) -> Probe {
    match kind {
        VerdictKind::Oscillatory => Probe::Above,
        VerdictKind::NonOscillatory => Probe::Below,
        VerdictKind::Inconclusive => Probe::Unknown,
    }
}

/// Brackets `inf{t > 0 : oscillatory at sign·t}`. Probe magnitudes are
/// positive; the bracket is for the magnitude.
pub fn oscillatory_threshold(
    field: &CoefficientField,
    sign: Sign,
    policy: &ClassifyPolicy,
) -> Result<ThresholdResult> {
    policy.validate()?;
    bisect::threshold(&policy.search, |t| {
        classify(field, sign.factor() * t, policy)
            .map(|v| to_probe(v.kind))
            .unwrap_or(Probe::Unknown)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroInEss {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub m_plus: Interval,
    /// Magnitude of `M₋`.
    pub m_minus: Interval,
    pub m: Interval,
    pub zero_in_ess: ZeroInEss,
    pub plus: ThresholdResult,
    pub minus: ThresholdResult,
    pub field: String,
}

/// Both thresholds (computed in parallel) and their minimum.
pub fn m_estimate(field: &CoefficientField, policy: &ClassifyPolicy) -> Result<SpectralEstimate> {
    policy.validate()?;
    let (plus, minus) = rayon::join(
        || oscillatory_threshold(field, Sign::Plus, policy),
        || oscillatory_threshold(field, Sign::Minus, policy),
    );
    let (plus, minus) = (plus?, minus?);
    let zero_in_ess = if plus.reaches_zero || minus.reaches_zero {
        ZeroInEss::Yes
    } else if plus.bracket.lo > 0.0 && minus.bracket.lo > 0.0 {
        ZeroInEss::No
    } else {
        ZeroInEss::Unknown
    };
    Ok(SpectralEstimate {
        m_plus: plus.bracket,
        m_minus: minus.bracket,
        m: plus.bracket.min(&minus.bracket),
        zero_in_ess,
        plus,
        minus,
        field: field.fingerprint(),
    })
}

/// For a diagonal field the spectrum is symmetric, so the two brackets must
/// overlap.
pub fn diagonal_symmetry_check(est: &SpectralEstimate, field: &CoefficientField) -> Result<bool> {
    if !field.is_diagonal() {
        return Err(Error::Precondition(format!(
            "`{}` is not diagonal",
            field.label()
        )));
    }
    if est.field != field.fingerprint() {
        return Err(Error::MismatchedField(
            est.field.clone(),
            field.fingerprint(),
        ));
    }
    Ok(est.m_plus.overlaps(&est.m_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::families::{constant_h, power_tail, section5, zero_phi};
    use std::f64::consts::FRAC_PI_4;

    fn kind(f: &CoefficientField, t: f64) -> VerdictKind {
        classify(f, t, &ClassifyPolicy::default()).unwrap().kind
    }

    #[test]
    fn basic_verdicts() {
        let c = constant_h(FRAC_PI_4, 0.0).unwrap();
        assert_eq!(kind(&c, 0.05), VerdictKind::Oscillatory);
        assert_eq!(kind(&c, -3.0), VerdictKind::Oscillatory);
        let z = zero_phi();
        assert_eq!(kind(&z, 5.0), VerdictKind::NonOscillatory);
        let p = power_tail(1.0, 2.0, 0.0).unwrap();
        assert_eq!(kind(&p, 1.0), VerdictKind::Oscillatory);
        assert_eq!(kind(&p, 0.25), VerdictKind::NonOscillatory);
        assert!(classify(&p, 0.0, &ClassifyPolicy::default()).is_err());
    }

    #[test]
    fn section5_sides_of_quarter() {
        let f = section5();
        assert_eq!(kind(&f, 1.0), VerdictKind::Oscillatory);
        assert_eq!(kind(&f, 0.2), VerdictKind::NonOscillatory);
        assert_eq!(kind(&f, -0.2), VerdictKind::NonOscillatory);
    }

    #[test]
    fn threshold_sentinels() {
        let r = oscillatory_threshold(&zero_phi(), Sign::Plus, &ClassifyPolicy::default()).unwrap();
        assert!(r.bracket.is_infinite());
        let e = m_estimate(
            &constant_h(FRAC_PI_4, 0.0).unwrap(),
            &ClassifyPolicy::default(),
        )
        .unwrap();
        assert_eq!(e.zero_in_ess, ZeroInEss::Yes);
        assert_eq!(e.m, Interval::new(0.0, 0.01));
    }
}
