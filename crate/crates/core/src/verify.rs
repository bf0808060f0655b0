//! End-to-end acceptance checks, runnable from the command line.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, TailPolicy};
use crate::error::Result;
use crate::interval::Interval;
use crate::model::families::{power_tail, section5, zero_phi};
use crate::model::{from_phi_g, CoefficientField};
use crate::ode::StepPolicy;
use crate::prufer;
use crate::schrodinger::{self, NegativeSpectrum, SchrodingerPolicy};
use crate::spectrum::{self, ClassifyPolicy, VerdictKind};
use crate::transforms::{self, Derivative};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(id: &str, title: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id: id.into(),
        title: title.into(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn full_system_edge() -> CriterionResult {
    timed(
        "AC1",
        "rank-one exponential system: M in a bracket of width <= 0.05 around 1/4",
        || {
            let start = Instant::now();
            let e = spectrum::m_estimate(&section5(), &ClassifyPolicy::default())?;
            let secs = start.elapsed().as_secs_f64();
            let ok = e.m.contains(0.25) && e.m.width() <= 0.05 && secs <= 120.0;
            Ok((
                ok,
                format!("m = {}, width {:.4}, {secs:.2} s", e.m, e.m.width()),
            ))
        },
    )
}

pub fn diagonal_system_edge() -> CriterionResult {
    timed(
        "AC2",
        "its diagonal part: M_d around 1/2, and M = M_d / 2",
        || {
            let policy = ClassifyPolicy::default();
            let full = section5();
            let diag = full.diagonal_part();
            let (e, d) = rayon::join(
                || spectrum::m_estimate(&full, &policy),
                || spectrum::m_estimate(&diag, &policy),
            );
            let (e, d) = (e?, d?);
            let ratio = if d.m.lo > 0.0 && d.m.is_bounded() && e.m.is_bounded() {
                Some(Interval::new(e.m.lo / d.m.hi, e.m.hi / d.m.lo))
            } else {
                None
            };
            let attained = ratio.is_some_and(|r| r.contains(0.5));
            let ok = d.m.contains(0.5) && d.m.width() <= 0.05 && attained;
            Ok((
                ok,
                format!(
                    "m_d = {}, width {:.4}; M/M_d in {}",
                    d.m,
                    d.m.width(),
                    ratio.map(|r| r.to_string()).unwrap_or_else(|| "n/a".into())
                ),
            ))
        },
    )
}

pub fn power_family_edge() -> CriterionResult {
    timed(
        "AC3",
        "c = 1, p = 2: M around 1/2 (width <= 0.2), A = B = 1",
        || {
            let f = power_tail(1.0, 2.0, 0.0)?;
            let e = spectrum::m_estimate(&f, &ClassifyPolicy::default())?;
            let exact = bounds::tail_stats(&f, &TailPolicy::default())?;
            let quad = bounds::tail_stats(
                &f,
                &TailPolicy {
                    use_exact: false,
                    ..TailPolicy::default()
                },
            )?;
            let ok = e.m.contains(0.5)
                && e.m.width() <= 0.2
                && exact.exact
                && exact.a_hat == 1.0
                && exact.b_hat == 1.0
                && (quad.a_hat - 1.0).abs() <= 1e-3
                && (quad.b_hat - 1.0).abs() <= 1e-3;
            let inconclusive = e.plus.inconclusive().len() + e.minus.inconclusive().len();
            Ok((
                ok,
                format!(
                    "m = {}, {inconclusive} inconclusive probes; quadrature A = {:.6}, B = {:.6}",
                    e.m, quad.a_hat, quad.b_hat
                ),
            ))
        },
    )
}

pub fn tail_bound_arithmetic() -> CriterionResult {
    timed("AC4", "tail bound arithmetic", || {
        let i1 = bounds::thm13_interval(1.0)?;
        let u1 = bounds::thm14_upper(1.0)?;
        let i0 = bounds::thm13_interval(0.0)?;
        let q = bounds::thm13_interval(0.25)?;
        let ok = (i1.lo - 0.5).abs() <= 1e-12
            && (i1.hi - 1.0).abs() <= 1e-12
            && (u1 - 0.5).abs() <= 1e-12
            && i0.is_infinite()
            && (q.lo - 1.0).abs() <= 1e-12
            && (q.hi - 2.0).abs() <= 1e-12;
        Ok((ok, format!("A=1 -> {i1}, B=1 -> {u1}, A=0 -> {i0}")))
    })
}

pub fn schrodinger_threshold() -> CriterionResult {
    timed(
        "AC5",
        "Schrödinger probe: S around 1/2, verdicts at 0.4 and 1, Euler zero count",
        || {
            let f = power_tail(1.0, 2.0, 0.0)?;
            let pol = SchrodingerPolicy::default();
            let s = schrodinger::s_bracket(&f, &pol)?;
            let t0 = Instant::now();
            let lo = schrodinger::negative_spectrum_finite(&f, 0.4, &pol)?;
            let lo_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let hi = schrodinger::negative_spectrum_finite(&f, 1.0, &pol)?;
            let hi_secs = t1.elapsed().as_secs_f64();
            let run = schrodinger::shoot_zero_energy(&f, 1.0, 1e6, &pol.step)?;
            let beta = 0.75f64.sqrt();
            let oracle = (beta * 1e6f64.ln_1p() / PI).floor() as i64;
            let count = run.final_count() as i64;
            let ok = s.bracket.overlaps(&Interval::new(0.45, 0.55))
                && lo.kind == NegativeSpectrum::Finite
                && hi.kind == NegativeSpectrum::Infinite
                && lo_secs <= 60.0
                && hi_secs <= 60.0
                && (count - oracle).abs() <= 1;
            Ok((
                ok,
                format!(
                    "S in {}; t=0.4 {:?}, t=1 {:?}; zeros {count} vs {oracle}",
                    s.bracket, lo.kind, hi.kind
                ),
            ))
        },
    )
}

pub fn discrete_spectrum_family() -> CriterionResult {
    timed(
        "AC6",
        "c = 1, p = 3: non-oscillatory up to t = 100, M infinite",
        || {
            let f = power_tail(1.0, 3.0, 0.0)?;
            let policy = ClassifyPolicy::default();
            let mut bad = Vec::new();
            for k in 0..=16 {
                let t = 10f64.powf(-2.0 + 0.25 * k as f64);
                for sign in [1.0, -1.0] {
                    let v = spectrum::classify(&f, sign * t, &policy)?;
                    if v.kind != VerdictKind::NonOscillatory {
                        bad.push(sign * t);
                    }
                }
            }
            let e = spectrum::m_estimate(&f, &policy)?;
            Ok((
                bad.is_empty() && e.m.is_infinite(),
                format!("m = {}, non-NonOscillatory probes: {bad:?}", e.m),
            ))
        },
    )
}

pub fn dirac_potential() -> CriterionResult {
    timed("AC7", "Dirac potential of diag(e^x, e^-x) is 1/2", || {
        let d = section5().diagonal_part();
        let xs: Vec<f64> = (0..100).map(|i| 0.2 * i as f64).collect();
        let w =
            transforms::diagonal_to_dirac(&d, Derivative::Exact(Arc::new(|x: f64| x.exp())), &xs)?;
        let worst = xs
            .iter()
            .map(|&x| (w.at(x) - 0.5).abs())
            .fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max error {worst:.2e}")))
    })
}

fn random_field(rng: &mut StdRng) -> Result<CoefficientField> {
    let c = rng.gen_range(0.05..1.0);
    let p = rng.gen_range(1.5..3.0);
    let g = rng.gen_range(0.0..1.0);
    Ok(power_tail(c, p, g)?.rotated(rng.gen_range(-PI..PI)))
}

pub fn property_suites(cases: usize, seed: u64) -> CriterionResult {
    timed("AC8", "randomized structural properties", || {
        let mut rng = StdRng::seed_from_u64(seed);
        let pol = StepPolicy::with_tolerances(1e-12, 1e-14);
        let mut failures: Vec<String> = Vec::new();
        let theta_at_end =
            |f: &CoefficientField, t: f64, th0: f64| -> Result<prufer::PruferTrajectory> {
                prufer::integrate(f, t, th0, 0.0, 60.0, &pol)
            };
        for _ in 0..cases {
            let f = random_field(&mut rng)?;
            let t1 = rng.gen_range(0.05..3.0);
            let t2 = t1 + rng.gen_range(0.01..2.0);
            let th0 = rng.gen_range(-3.0..3.0);
            let dth = rng.gen_range(0.0..2.0);
            let a = theta_at_end(&f, t1, th0)?;
            let b = theta_at_end(&f, t2, th0)?;
            let c = theta_at_end(&f, t1, th0 + dth)?;
            let d = theta_at_end(&f, t1, th0 + PI)?;
            if a.samples.windows(2).any(|w| w[1].theta < w[0].theta) {
                failures.push("monotone in x".into());
            }
            if a.samples
                .iter()
                .zip(&b.samples)
                .any(|(p, q)| p.theta > q.theta + 1e-8)
            {
                failures.push("monotone in t".into());
            }
            if a.samples
                .iter()
                .zip(&c.samples)
                .any(|(p, q)| p.theta > q.theta + 1e-8)
            {
                failures.push("initial ordering".into());
            }
            // equal up to accumulated integrator error
            if a.samples
                .iter()
                .zip(&d.samples)
                .any(|(p, q)| (p.theta + PI - q.theta).abs() > 1e-7 * (1.0 + q.theta.abs()))
            {
                failures.push("pi shift".into());
            }
        }
        for _ in 0..cases * 50 {
            let h = from_phi_g(rng.gen_range(-PI..PI), rng.gen_range(0.0..=1.0), 1.0)?;
            let th = rng.gen_range(-PI..PI);
            if prufer::rhs(1.0, th, &h) > 2.0 * prufer::rhs(1.0, th, &h.diagonal()) + 1e-12 {
                failures.push("f(H) <= 2 f(H_d)".into());
            }
        }
        let policy = ClassifyPolicy::default();
        let families = [
            power_tail(1.0, 2.0, 0.0)?,
            power_tail(0.5, 2.0, 0.6)?,
            section5(),
            zero_phi(),
            power_tail(1.0, 3.0, 0.0)?,
        ];
        let reference: Vec<_> = families
            .iter()
            .map(|f| spectrum::m_estimate(f, &policy))
            .collect::<Result<_>>()?;
        for k in 0..cases / 20 {
            let i = k % families.len();
            let r = families[i].rotated(rng.gen_range(-PI..PI));
            let e = spectrum::m_estimate(&r, &policy)?;
            if !e.m.overlaps(&reference[i].m) {
                failures.push(format!("rotation invariance of {}", families[i].label()));
            }
        }
        for _ in 0..cases / 20 {
            let f = random_field(&mut rng)?;
            let lo = rng.gen_range(0.05..1.0);
            let mut seen_osc = false;
            for j in 0..8 {
                let t = lo * 1.5f64.powi(j);
                match spectrum::classify(&f, t, &policy)?.kind {
                    VerdictKind::Oscillatory => seen_osc = true,
                    VerdictKind::NonOscillatory if seen_osc => {
                        failures.push("upward closure".into());
                    }
                    _ => {}
                }
            }
        }
        let spol = SchrodingerPolicy::default();
        for _ in 0..cases / 20 {
            let f = power_tail(rng.gen_range(0.2..1.0), 2.0, 0.0)?;
            let mut seen_inf = false;
            for j in 0..8 {
                let t = 0.1 * 1.5f64.powi(j);
                match schrodinger::negative_spectrum_finite(&f, t, &spol)?.kind {
                    NegativeSpectrum::Infinite => seen_inf = true,
                    NegativeSpectrum::Finite if seen_inf => failures.push("single switch".into()),
                    _ => {}
                }
            }
        }
        failures.sort();
        failures.dedup();
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                format!("{cases} cases per suite")
            } else {
                format!("failed: {}", failures.join(", "))
            },
        ))
    })
}

pub fn riccati_crosscheck() -> CriterionResult {
    timed("AC9", "Riccati residual below 1e-6", || {
        let free = schrodinger::riccati_crosscheck(&zero_phi(), 1.0, 1.0, 1e6)?;
        let p = power_tail(1.0, 2.0, 0.0)?;
        let pow = schrodinger::riccati_crosscheck(&p, 0.3, 1.0, 1e6)?;
        Ok((
            free < 1e-6 && pow < 1e-6,
            format!("free {free:.2e}, power {pow:.2e}"),
        ))
    })
}

/// Every criterion, in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        full_system_edge(),
        diagonal_system_edge(),
        power_family_edge(),
        tail_bound_arithmetic(),
        schrodinger_threshold(),
        discrete_spectrum_family(),
        dirac_potential(),
        property_suites(200, 7),
        riccati_crosscheck(),
    ]
}
