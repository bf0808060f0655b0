//! Tail statistics `A = limsup s W(s)`, `B = liminf s W(s)` with
//! `W(s) = ∫_s^∞ sin²φ`, the threshold bounds they imply, and a
//! cross-check of measured brackets against those bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{ext_real, Interval};
use crate::model::CoefficientField;
use crate::quad;
use crate::spectrum::SpectralEstimate;

/// `2 / (3 - √5)`, the upper comparison constant between full and diagonal
/// thresholds.
pub fn comparison_constant() -> f64 {
    2.0 / (3.0 - 5f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailModel {
    /// `W(T) = 0` at the truncation point (flagged in the output).
    Zero,
    /// `sin²φ ~ s^-p` past the truncation, with `p` fitted over the last
    /// decade before it.
    PowerFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPolicy {
    pub x_lo: f64,
    pub x_hi: f64,
    pub per_decade: usize,
    pub truncation: f64,
    pub tail_model: TailModel,
    /// Use a closed-form tail when the field has one.
    pub use_exact: bool,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy {
            x_lo: 1.0,
            x_hi: 1e6,
            per_decade: 20,
            truncation: 1e12,
            tail_model: TailModel::PowerFit,
            use_exact: true,
        }
    }
}

impl TailPolicy {
    fn validate(&self) -> Result<()> {
        if !(self.x_lo > 0.0 && self.x_hi >= 100.0 * self.x_lo && self.truncation >= self.x_hi) {
            return Err(Error::InvalidParam(
                "tail window needs 0 < x_lo, x_hi >= 100 x_lo and truncation >= x_hi".into(),
            ));
        }
        if self.per_decade < 2 {
            return Err(Error::InvalidParam(
                "need at least 2 samples per decade".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSample {
    pub x: f64,
    pub w: f64,
    pub xw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub samples: Vec<TailSample>,
    #[serde(with = "ext_real")]
    pub a_hat: f64,
    #[serde(with = "ext_real")]
    pub b_hat: f64,
    pub exact: bool,
    /// `[x_hi / 10, x_hi]`, the window the sup and inf are taken over.
    pub window: (f64, f64),
    /// Change of the window sup/inf relative to the decade before.
    pub convergence_gap: f64,
    /// Decay exponent of `sin²φ` fitted over the last decade.
    pub fitted_exponent: Option<f64>,
    pub notes: Vec<String>,
    pub field: String,
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo * (hi / lo).powf(i as f64 / n as f64)
            }
        })
        .collect()
}

fn window_extremes(samples: &[TailSample], lo: f64, hi: f64) -> (f64, f64) {
    samples
        .iter()
        .filter(|s| s.x >= lo * (1.0 - 1e-12) && s.x <= hi * (1.0 + 1e-12))
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), s| {
            (a.max(s.xw), b.min(s.xw))
        })
}

/// Estimates (or reads off) `A` and `B` for the trace-normed system in its
/// L² frame.
pub fn tail_stats(field: &CoefficientField, policy: &TailPolicy) -> Result<TailStats> {
    policy.validate()?;
    if !field.l2_direction_ok() {
        return Err(Error::Precondition(format!(
            "`{}` has no declared L² direction",
            field.label()
        )));
    }
    let xs = log_grid(policy.x_lo, policy.x_hi, policy.per_decade);
    let window = (policy.x_hi / 10.0, policy.x_hi);
    let prev = (policy.x_hi / 100.0, policy.x_hi / 10.0);
    let mut notes = Vec::new();

    if let (true, Some(tail)) = (policy.use_exact, field.tail()) {
        let samples: Vec<_> = xs
            .iter()
            .map(|&x| {
                let w = tail.w(x);
                TailSample { x, w, xw: x * w }
            })
            .collect();
        let (sup1, inf1) = window_extremes(&samples, window.0, window.1);
        let (sup0, inf0) = window_extremes(&samples, prev.0, prev.1);
        notes.push("A and B taken from the closed-form tail".into());
        return Ok(TailStats {
            samples,
            a_hat: tail.a_exact,
            b_hat: tail.b_exact,
            exact: true,
            window,
            convergence_gap: (sup1 - sup0).abs().max((inf1 - inf0).abs()),
            fitted_exponent: None,
            notes,
            field: field.fingerprint(),
        });
    }

    let end = field.s_domain_end();
    if policy.truncation > end {
        return Err(Error::Domain {
            x: policy.truncation,
            end,
        });
    }
    let sin2 = |s: f64| field.analysis_at_s(s).h11;
    let t = policy.truncation;
    let h_t = sin2(t);
    let h_t10 = sin2(t / 10.0);
    let fitted = if h_t > 0.0 && h_t10 > 0.0 {
        Some((h_t10 / h_t).log10())
    } else {
        None
    };
    let beyond = match (policy.tail_model, fitted) {
        (_, Some(p)) if p <= 1.0 => {
            return Err(Error::Divergent(format!(
                "sin²φ decays like s^-{p:.3} near s = {t:.1e}; its integral does not converge"
            )))
        }
        (TailModel::Zero, _) => {
            notes.push(format!("W({t:.1e}) assumed to be 0"));
            0.0
        }
        (TailModel::PowerFit, Some(p)) => {
            notes.push(format!("tail past {t:.1e} modelled as s^-{p:.4}"));
            h_t * t / (p - 1.0)
        }
        (TailModel::PowerFit, None) => 0.0,
    };
    let (head, _) = quad::integrate_log(sin2, policy.x_hi, t, 1e-300, 1e-12);
    let mut w = beyond + head;
    let mut samples = vec![TailSample {
        x: policy.x_hi,
        w,
        xw: policy.x_hi * w,
    }];
    for pair in xs.windows(2).rev() {
        let (piece, _) = quad::integrate_log(sin2, pair[0], pair[1], 1e-300, 1e-12);
        w += piece;
        samples.push(TailSample {
            x: pair[0],
            w,
            xw: pair[0] * w,
        });
    }
    samples.reverse();
    if !w.is_finite() {
        return Err(Error::Divergent("W is not finite".into()));
    }
    let (sup1, inf1) = window_extremes(&samples, window.0, window.1);
    let (sup0, inf0) = window_extremes(&samples, prev.0, prev.1);
    Ok(TailStats {
        samples,
        a_hat: sup1,
        b_hat: inf1,
        exact: false,
        window,
        convergence_gap: (sup1 - sup0).abs().max((inf1 - inf0).abs()),
        fitted_exponent: fitted,
        notes,
        field: field.fingerprint(),
    })
}

fn check_stat(name: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::Range {
            name,
            value: v,
            expected: "a value in [0, inf]",
        });
    }
    Ok(())
}

/// `[1/(2√A), 1/√A]`, the range of the diagonal threshold given `A`.
/// `A = 0` gives the infinite sentinel (no essential spectrum), `A = ∞`
/// gives `[0, 0]`.
pub fn thm13_interval(a: f64) -> Result<Interval> {
    check_stat("A", a)?;
    Ok(if a == 0.0 {
        Interval::infinite()
    } else if a == f64::INFINITY {
        Interval::point(0.0)
    } else {
        let r = a.sqrt();
        Interval::new(0.5 / r, 1.0 / r)
    })
}

/// `1/(2√B)`, an upper bound for the diagonal threshold.
pub fn thm14_upper(b: f64) -> Result<f64> {
    check_stat("B", b)?;
    Ok(if b == 0.0 {
        f64::INFINITY
    } else {
        0.5 / b.sqrt()
    })
}

/// `[M_d/2, M_d · 2/(3-√5)]`, the range of the full threshold given the
/// diagonal one.
pub fn thm11_interval(m_d: &Interval) -> Interval {
    if m_d.is_infinite() {
        return Interval::infinite();
    }
    Interval::new(0.5 * m_d.lo, m_d.hi * comparison_constant())
}

/// The essential spectrum is empty exactly when `A = 0`.
pub fn discrete_spectrum(stats: &TailStats) -> bool {
    stats.a_hat == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub checks: Vec<Check>,
    pub thm13: Interval,
    #[serde(with = "ext_real")]
    pub thm14_upper: f64,
    pub thm11: Interval,
    /// Range of `M / M_d` implied by the two brackets.
    pub ratio: Option<Interval>,
    /// `M = M_d / 2` is compatible with the brackets.
    pub lower_endpoint_attained: Option<bool>,
    pub discrete_spectrum: bool,
    pub all_passed: bool,
}

fn widen(i: &Interval) -> Interval {
    i.inflate(i.width(), 0.05)
}

fn ratio(m: &Interval, m_d: &Interval) -> Option<Interval> {
    if m.is_infinite() || m_d.is_infinite() || m_d.lo <= 0.0 || !m.is_bounded() || !m_d.is_bounded()
    {
        return None;
    }
    Some(Interval::new(m.lo / m_d.hi, m.hi / m_d.lo))
}

/// Checks measured brackets against the tail bounds, the comparison
/// sandwich, the Schrödinger threshold `s` and the symmetry of the diagonal
/// system. `diag_est` may be omitted for diagonal fields.
pub fn consistency_report(
    field: &CoefficientField,
    est: &SpectralEstimate,
    diag_est: Option<&SpectralEstimate>,
    s: &Interval,
    stats: &TailStats,
) -> Result<ConsistencyReport> {
    let me = field.fingerprint();
    let diag_field = field.diagonal_part();
    if est.field != me {
        return Err(Error::MismatchedField(est.field.clone(), me));
    }
    let diag = match diag_est {
        Some(d) => {
            let want = if field.is_diagonal() {
                me.clone()
            } else {
                diag_field.fingerprint()
            };
            if d.field != want && d.field != me {
                return Err(Error::MismatchedField(d.field.clone(), want));
            }
            d
        }
        None if field.is_diagonal() => est,
        None => {
            return Err(Error::Precondition(
                "a non-diagonal field needs the estimate of its diagonal part".into(),
            ))
        }
    };
    if stats.field != me && stats.field != diag_field.fingerprint() {
        return Err(Error::MismatchedField(stats.field.clone(), me));
    }

    let thm13 = thm13_interval(stats.a_hat)?;
    let thm14 = thm14_upper(stats.b_hat)?;
    let m = widen(&est.m);
    let m_d = widen(&diag.m);
    let thm11 = thm11_interval(&diag.m);
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };
    let t13 = thm13.inflate(0.0, 0.05);
    push(
        "tail_interval",
        m_d.overlaps(&t13),
        format!("M(H_d) in {} vs A-bound {}", diag.m, thm13),
    );
    push(
        "tail_upper",
        m_d.lo <= thm14 * 1.05,
        format!("M(H_d) >= {:.6} vs B-bound {:.6}", diag.m.lo, thm14),
    );
    push(
        "schrodinger",
        m_d.overlaps(&widen(s)),
        format!("S in {} vs M(H_d) in {}", s, diag.m),
    );
    push(
        "comparison",
        m.overlaps(&thm11.inflate(0.0, 0.05)),
        format!("M(H) in {} vs {}", est.m, thm11),
    );
    push(
        "diagonal_symmetry",
        widen(&diag.m_plus).overlaps(&widen(&diag.m_minus)),
        format!("M+ in {} vs |M-| in {}", diag.m_plus, diag.m_minus),
    );
    let r = ratio(&est.m, &diag.m);
    let lower = r.map(|r| r.contains(0.5));
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ConsistencyReport {
        checks,
        thm13,
        thm14_upper: thm14,
        thm11,
        ratio: r,
        lower_endpoint_attained: lower,
        discrete_spectrum: discrete_spectrum(stats),
        all_passed,
    })
}
