//! Zero counting for `-u'' - t² sin²φ(x) u = 0`, `u(0) = 0`.
//!
//! The number of zeros of this solution on `(0, ∞)` equals the number of
//! negative eigenvalues of `-d²/dx² - t² sin²φ` with a Dirichlet condition
//! at 0. Integration uses `w = ln(1 + x)` and the angle `ζ` defined by
//! `u = r sin ζ`, `(1 + x) u' = r cos ζ`, which stays well scaled when
//! `sin²φ ~ x^-2`:
//!
//! `dζ/dw = cos²ζ - sin ζ cos ζ + (1 + x)² t² sin²φ sin²ζ`.
//!
//! `x` is arclength and `sin²φ` is taken in the frame of the declared L²
//! direction.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bisect::{self, Probe, SearchPolicy, ThresholdResult};
use crate::error::{Error, Result};
use crate::model::CoefficientField;
use crate::ode::{self, StepPolicy, StepStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingRun {
    pub t: f64,
    /// Angle with `u = r sin ψ`, `u' = r cos ψ` at the final horizon.
    pub psi: f64,
    /// `(X, zeros of u on (0, X])` at log-spaced horizons.
    pub zero_counts: Vec<(f64, u64)>,
    pub step_stats: StepStats,
}

impl ShootingRun {
    pub fn final_count(&self) -> u64 {
        self.zero_counts.last().map(|c| c.1).unwrap_or(0)
    }

    /// CSV with header `X,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("X,count\n");
        for (x, c) in &self.zero_counts {
            let _ = writeln!(out, "{x:.17e},{c}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerPolicy {
    /// Final horizon `X`.
    pub x_max: f64,
    pub step: StepPolicy,
    pub search: SearchPolicy,
}

impl Default for SchrodingerPolicy {
    fn default() -> Self {
        SchrodingerPolicy {
            x_max: 1e8,
            step: StepPolicy::with_tolerances(1e-10, 1e-12),
            search: SearchPolicy::default(),
        }
    }
}

impl SchrodingerPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max >= 16.0 && self.x_max.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "horizon {} must be at least 16",
                self.x_max
            )));
        }
        self.step.validate()?;
        self.search.validate()
    }
}

fn check_field(field: &CoefficientField, t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParam(format!("t = {t}: need t >= 0")));
    }
    if !field.l2_direction_ok() {
        return Err(Error::Precondition(format!(
            "`{}` has no declared L² direction",
            field.label()
        )));
    }
    Ok(())
}

struct Shooter<'a> {
    field: &'a CoefficientField,
    t: f64,
    w: f64,
    zeta: f64,
    h: f64,
    policy: StepPolicy,
    stats: StepStats,
}

impl<'a> Shooter<'a> {
    fn new(field: &'a CoefficientField, t: f64, policy: StepPolicy) -> Self {
        Shooter {
            field,
            t,
            w: 0.0,
            zeta: 0.0,
            h: policy.initial_step,
            policy,
            stats: StepStats::default(),
        }
    }

    fn advance(&mut self, w1: f64) -> Result<()> {
        if w1 <= self.w {
            return Ok(());
        }
        let field = self.field;
        let t2 = self.t * self.t;
        let f = move |w: f64, z: f64| {
            let x = w.exp_m1();
            let k = w.exp();
            let v = field.analysis_at_s(x).h11;
            let (s, c) = z.sin_cos();
            c * c - s * c + k * k * t2 * v * s * s
        };
        self.zeta = ode::integrate(
            f,
            self.w,
            self.zeta,
            w1,
            &mut self.h,
            &self.policy,
            &mut self.stats,
            |_, y| y,
        )?;
        self.w = w1;
        Ok(())
    }

    fn count(&self) -> u64 {
        (self.zeta / PI).floor().max(0.0) as u64
    }

    fn psi(&self) -> f64 {
        let k = ((self.zeta + FRAC_PI_2) / PI).floor();
        let r = self.zeta - k * PI;
        let (s, c) = r.sin_cos();
        k * PI + (self.w.exp() * s).atan2(c)
    }

    /// `-u'/(t u)` from the angle.
    fn riccati_value(&self) -> f64 {
        let (s, c) = self.zeta.sin_cos();
        -c / (self.w.exp() * self.t * s)
    }
}

fn log_points(x_end: f64, extra: &[f64]) -> Vec<f64> {
    let w_end = x_end.ln_1p();
    let n = ((20.0 * w_end / std::f64::consts::LN_10).ceil() as usize).max(8);
    let mut pts: Vec<f64> = (1..=n).map(|i| w_end * i as f64 / n as f64).collect();
    pts.extend(extra.iter().copied().filter(|&w| w > 0.0 && w < w_end));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Shoots from `u(0) = 0, u'(0) = 1` to `x_end`, counting zeros at
/// log-spaced horizons.
pub fn shoot_zero_energy(
    field: &CoefficientField,
    t: f64,
    x_end: f64,
    policy: &StepPolicy,
) -> Result<ShootingRun> {
    check_field(field, t)?;
    if !(x_end > 0.0) || x_end > field.s_domain_end() {
        return Err(Error::InvalidParam(format!(
            "horizon {x_end} is outside the domain"
        )));
    }
    policy.validate()?;
    let mut sh = Shooter::new(field, t, *policy);
    let mut counts = Vec::new();
    for w in log_points(x_end, &[]) {
        sh.advance(w)?;
        counts.push((w.exp_m1(), sh.count()));
    }
    Ok(ShootingRun {
        t,
        psi: sh.psi(),
        zero_counts: counts,
        step_stats: sh.stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeSpectrum {
    Finite,
    Infinite,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeSpectrumVerdict {
    pub t: f64,
    pub kind: NegativeSpectrum,
    pub run: ShootingRun,
    /// Smallest sampled `a` with `t² sup_{x>=a} x W(x) < 1/4`, if any.
    pub certified_from: Option<f64>,
    pub reason: String,
}

fn certified(field: &CoefficientField, t: f64, a: f64) -> bool {
    if field.support_end().is_some_and(|end| a >= end) {
        return true;
    }
    field
        .tail()
        .is_some_and(|tail| t * t * tail.sup_xw_from(a) < 0.25)
}

/// Finite: a Hille-type certificate holds by `X/16` and no zero appears on
/// `[X/16, X]`. Infinite: the zero count grows over both
/// `[w/4, w/2]` and `[w/2, w]` (`w = ln(1 + X)`) and no certificate holds.
pub fn negative_spectrum_finite(
    field: &CoefficientField,
    t: f64,
    policy: &SchrodingerPolicy,
) -> Result<NegativeSpectrumVerdict> {
    check_field(field, t)?;
    policy.validate()?;
    let x_max = policy.x_max.min(field.s_domain_end());
    let w_end = x_max.ln_1p();
    let w_quarter = 0.25 * w_end;
    let w_half = 0.5 * w_end;
    let w_tail = (x_max / 16.0).ln_1p();
    let mut sh = Shooter::new(field, t, policy.step);
    let mut counts = Vec::new();
    let mut certified_from = None;
    let at = |w: f64, c: u64, marks: &mut [Option<u64>; 3]| {
        if w == w_quarter {
            marks[0] = Some(c);
        }
        if w == w_half {
            marks[1] = Some(c);
        }
        if w == w_tail {
            marks[2] = Some(c);
        }
    };
    let mut marks = [None; 3];
    let mut failure = None;
    for w in log_points(x_max, &[w_quarter, w_half, w_tail]) {
        if let Err(e) = sh.advance(w) {
            failure = Some(e);
            break;
        }
        let x = w.exp_m1();
        let c = sh.count();
        counts.push((x, c));
        at(w, c, &mut marks);
        if certified_from.is_none() && certified(field, t, x) {
            certified_from = Some(x);
        }
    }
    let run = ShootingRun {
        t,
        psi: sh.psi(),
        zero_counts: counts,
        step_stats: sh.stats,
    };
    if let Some(e) = failure {
        return Ok(NegativeSpectrumVerdict {
            t,
            kind: NegativeSpectrum::Inconclusive,
            run,
            certified_from,
            reason: format!("integration stopped: {e}"),
        });
    }
    let end = run.final_count();
    let (kind, reason) = match (certified_from, marks) {
        (Some(a), [_, _, Some(c_tail)]) if a <= x_max / 16.0 && c_tail == end => (
            NegativeSpectrum::Finite,
            format!("certificate holds from x = {a:.3e} and no zero lies in [X/16, X]"),
        ),
        (None, [Some(q), Some(h), _]) if q < h && h < end => (
            NegativeSpectrum::Infinite,
            format!("zero count {q} -> {h} -> {end} keeps growing in ln(1 + x)"),
        ),
        _ => (
            NegativeSpectrum::Inconclusive,
            "neither a certified plateau nor steady zero growth".into(),
        ),
    };
    Ok(NegativeSpectrumVerdict {
        t,
        kind,
        run,
        certified_from,
        reason,
    })
}

/// Brackets `S = sup{t >= 0 : finitely many negative eigenvalues}`.
pub fn s_bracket(field: &CoefficientField, policy: &SchrodingerPolicy) -> Result<ThresholdResult> {
    check_field(field, 0.0)?;
    policy.validate()?;
    bisect::threshold(&policy.search, |t| {
        match negative_spectrum_finite(field, t, policy).map(|v| v.kind) {
            Ok(NegativeSpectrum::Finite) => Probe::Below,
            Ok(NegativeSpectrum::Infinite) => Probe::Above,
            _ => Probe::Unknown,
        }
    })
}

/// Integrates `θ₂' = t(θ₂² + sin²φ)` from `θ₂(a) = -u'(a)/(t u(a))` and
/// returns `max |θ₂ + u'/(t u)|` over log-spaced points of `[a, x_end]`.
pub fn riccati_crosscheck(field: &CoefficientField, t: f64, a: f64, x_end: f64) -> Result<f64> {
    check_field(field, t)?;
    if !(t > 0.0) {
        return Err(Error::InvalidParam("the Riccati form needs t > 0".into()));
    }
    if !(a > 0.0 && x_end > a) {
        return Err(Error::InvalidParam(format!(
            "need 0 < a < X, got a = {a}, X = {x_end}"
        )));
    }
    let pol = StepPolicy::with_tolerances(1e-13, 1e-15);
    let mut sh = Shooter::new(field, t, pol);
    let w_a = a.ln_1p();
    sh.advance(w_a)?;
    let zeros_at_a = (sh.zeta / PI).floor();
    if sh.zeta.sin() == 0.0 {
        return Err(Error::SolutionVanishes { a, b: x_end });
    }
    let mut theta2 = sh.riccati_value();
    let mut h = pol.initial_step;
    let mut stats = StepStats::default();
    let rhs = |w: f64, th: f64| {
        let x = w.exp_m1();
        w.exp() * t * (th * th + field.analysis_at_s(x).h11)
    };
    let w_end = x_end.ln_1p();
    let n = ((40.0 * (w_end - w_a)).ceil() as usize).max(16);
    let mut worst: f64 = 0.0;
    for i in 1..=n {
        let w = w_a + (w_end - w_a) * i as f64 / n as f64;
        sh.advance(w)?;
        if (sh.zeta / PI).floor() != zeros_at_a {
            return Err(Error::SolutionVanishes { a, b: x_end });
        }
        theta2 = ode::integrate(
            rhs,
            w - (w_end - w_a) / n as f64,
            theta2,
            w,
            &mut h,
            &pol,
            &mut stats,
            |_, y| y,
        )?;
        worst = worst.max((theta2 - sh.riccati_value()).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::families::{power_tail, zero_phi};

    #[test]
    fn free_equation_has_no_zeros() {
        let f = zero_phi();
        let r = shoot_zero_energy(&f, 3.0, 1e8, &StepPolicy::default()).unwrap();
        assert!(r.zero_counts.iter().all(|c| c.1 == 0));
        let p = power_tail(1.0, 2.0, 0.0).unwrap();
        let r = shoot_zero_energy(&p, 0.0, 1e6, &StepPolicy::default()).unwrap();
        assert_eq!(r.final_count(), 0);
        // ψ for u = x: tan ψ = x, so ψ → π/2
        assert!((r.psi - FRAC_PI_2).abs() < 1e-5);
    }

    #[test]
    fn euler_zero_count() {
        let p = power_tail(1.0, 2.0, 0.0).unwrap();
        let r =
            shoot_zero_energy(&p, 1.0, 1e6, &StepPolicy::with_tolerances(1e-10, 1e-12)).unwrap();
        let beta = 0.75f64.sqrt();
        let exact = (beta * 1e6f64.ln_1p() / PI).floor() as u64;
        assert_eq!(r.final_count(), exact);
        assert!(r.to_csv().starts_with("X,count\n"));
    }

    #[test]
    fn verdicts_around_quarter() {
        let p = power_tail(1.0, 2.0, 0.0).unwrap();
        let pol = SchrodingerPolicy::default();
        assert_eq!(
            negative_spectrum_finite(&p, 0.4, &pol).unwrap().kind,
            NegativeSpectrum::Finite
        );
        assert_eq!(
            negative_spectrum_finite(&p, 1.0, &pol).unwrap().kind,
            NegativeSpectrum::Infinite
        );
        assert_eq!(
            negative_spectrum_finite(&zero_phi(), 2.0, &pol)
                .unwrap()
                .kind,
            NegativeSpectrum::Finite
        );
    }

    #[test]
    fn riccati_free_case() {
        let f = zero_phi();
        assert!(riccati_crosscheck(&f, 1.0, 1.0, 1e4).unwrap() < 1e-8);
        assert!(riccati_crosscheck(&f, 0.1, 1.0, 1e4).unwrap() < 1e-8);
        let p = power_tail(1.0, 2.0, 0.0).unwrap();
        assert!(matches!(
            riccati_crosscheck(&p, 1.0, 1.0, 1e6),
            Err(Error::SolutionVanishes { .. })
        ));
    }
}
