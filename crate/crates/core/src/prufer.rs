//! The Prüfer angle equation `θ' = t e_θ^* H e_θ`, `e_θ = (cos θ, sin θ)`.
//!
//! Two routes are provided. [`integrate`] solves the equation as written, in
//! the field's own variable and frame. [`LongRun`] is used for horizons far
//! beyond double precision of `θ` itself: it works in arclength `s`, in the
//! frame of the declared L² direction, with the variable `u = ln(1 + s)` and
//! a rescaled angle `tan ψ = κ tan θ` (`κ = 1 + s` for [`AngleScale::Log`]).
//! `ψ` and `θ` cross the lines `π/2 + nπ` together, and `θ` is recovered
//! exactly from `ψ`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AngleScale, CoefficientField, HMatrix};
use crate::ode::{self, StepPolicy, StepStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruferState {
    pub x: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferTrajectory {
    pub samples: Vec<PruferState>,
    pub t: f64,
    pub rotations: f64,
    pub step_stats: StepStats,
}

/// `t e_θ^* H e_θ`.
pub fn rhs(t: f64, theta: f64, h: &HMatrix) -> f64 {
    t * h.quad_form(theta)
}

/// `(θ_end - θ_start) / π`.
pub fn rotation_count(traj: &PruferTrajectory) -> f64 {
    match (traj.samples.first(), traj.samples.last()) {
        (Some(a), Some(b)) => (b.theta - a.theta) / PI,
        _ => 0.0,
    }
}

/// CSV with header `x,theta`.
pub fn trajectory_csv(traj: &PruferTrajectory) -> String {
    let mut out = String::from("x,theta\n");
    for p in &traj.samples {
        let _ = writeln!(out, "{:.17e},{:.17e}", p.x, p.theta);
    }
    out
}

pub fn write_trajectory_csv<W: io::Write>(traj: &PruferTrajectory, mut w: W) -> io::Result<()> {
    w.write_all(trajectory_csv(traj).as_bytes())
}

/// Output points on `[x0, x1]`, geometric in `1 + x`, about 20 per decade.
fn checkpoints(x0: f64, x1: f64) -> Vec<f64> {
    let decades = ((1.0 + x1) / (1.0 + x0)).log10();
    let n = ((20.0 * decades).ceil() as usize).clamp(8, 4000);
    let ratio = ((1.0 + x1) / (1.0 + x0)).powf(1.0 / n as f64);
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(x0);
    let mut y = 1.0 + x0;
    for _ in 1..n {
        y *= ratio;
        let x = y - 1.0;
        if x > *pts.last().unwrap() && x < x1 {
            pts.push(x);
        }
    }
    pts.push(x1);
    pts
}

/// Exact solution of `θ' = t e_θ^* M e_θ` with constant `M` over a length
/// `dx`.
pub fn constant_advance(m: &HMatrix, t: f64, theta: f64, dx: f64) -> f64 {
    let mu = 0.5 * (m.h11 + m.h22);
    let rho = (0.5 * (m.h11 - m.h22)).hypot(m.h12);
    let lam1 = mu + rho;
    let lam2 = mu - rho;
    if lam1 <= 0.0 || t == 0.0 || dx == 0.0 {
        return theta;
    }
    // principal axis of M
    let delta = 0.5 * (2.0 * m.h12).atan2(m.h11 - m.h22);
    let omega = theta - delta;
    let n = ((omega + FRAC_PI_2) / PI).floor();
    let r = omega - n * PI;
    if lam2 <= 1e-15 * lam1 {
        // rank one: tan ω moves linearly and never leaves its branch
        if r == -FRAC_PI_2 {
            return theta;
        }
        let r_new = (r.tan() + t * lam1 * dx).atan();
        return delta + n * PI + r_new;
    }
    // atan(k tan ω) advances linearly at rate t √(λ1 λ2)
    let k = (lam2 / lam1).sqrt();
    let lifted = n * PI + (k * r.tan()).atan();
    let lifted = if r == -FRAC_PI_2 {
        n * PI - FRAC_PI_2
    } else {
        lifted
    };
    let target = lifted + t * (lam1 * lam2).sqrt() * dx;
    let n2 = ((target + FRAC_PI_2) / PI).floor();
    let rf = target - n2 * PI;
    let r2 = if rf == -FRAC_PI_2 {
        rf
    } else {
        (rf.tan() / k).atan()
    };
    delta + n2 * PI + r2
}

/// Integrates the angle equation in the field's own variable and frame from
/// `theta0` at `x0` to `x1`, with output at log-spaced checkpoints.
///
/// For `t > 0` the angle is never allowed to decrease (for `t < 0` never
/// to increase). Piecewise-constant fields are advanced exactly cell by
/// cell.
pub fn integrate(
    field: &CoefficientField,
    t: f64,
    theta0: f64,
    x0: f64,
    x1: f64,
    policy: &StepPolicy,
) -> Result<PruferTrajectory> {
    policy.validate()?;
    if !(x0 >= 0.0) || !(x1 > x0) {
        return Err(Error::InvalidParam(format!(
            "need 0 <= x0 < x1, got [{x0}, {x1}]"
        )));
    }
    if x1 > field.domain_end() {
        return Err(Error::Domain {
            x: x1,
            end: field.domain_end(),
        });
    }
    if !t.is_finite() || !theta0.is_finite() {
        return Err(Error::InvalidParam("t and theta0 must be finite".into()));
    }
    let pts = checkpoints(x0, x1);
    let mut samples = Vec::with_capacity(pts.len());
    samples.push(PruferState {
        x: x0,
        theta: theta0,
    });
    let mut stats = StepStats::default();
    let mut theta = theta0;

    if let Some(grid) = field.grid() {
        let starts = grid.starts();
        for w in pts.windows(2) {
            let (mut a, b) = (w[0], w[1]);
            while a < b {
                let i = grid.cell_index(a);
                let end = starts.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
                let m = field.h_at(a)?;
                theta = constant_advance(&m, t, theta, end - a);
                stats.steps += 1;
                a = end;
            }
            samples.push(PruferState { x: b, theta });
        }
    } else {
        let mut h = policy.initial_step;
        let f = |x: f64, th: f64| {
            let m = field.normalized_unchecked(x);
            t * field.trace_at(x) * m.quad_form(th)
        };
        let clamp = |old: f64, new: f64| {
            if t > 0.0 {
                new.max(old)
            } else if t < 0.0 {
                new.min(old)
            } else {
                old
            }
        };
        for w in pts.windows(2) {
            theta = ode::integrate(f, w[0], theta, w[1], &mut h, policy, &mut stats, clamp)?;
            samples.push(PruferState { x: w[1], theta });
        }
    }
    let rotations = (theta - theta0) / PI;
    Ok(PruferTrajectory {
        samples,
        t,
        rotations,
        step_stats: stats,
    })
}

/// Angle scale actually used for a field: the log scale needs a declared L²
/// direction.
pub(crate) fn effective_scale(field: &CoefficientField) -> AngleScale {
    if field.l2_direction_ok() {
        field.scale()
    } else {
        AngleScale::Unit
    }
}

/// Long-horizon integration state in the variable `u = ln(1 + s)`.
pub struct LongRun<'a> {
    field: &'a CoefficientField,
    t: f64,
    scale: AngleScale,
    offset: f64,
    u: f64,
    psi: f64,
    h: f64,
    policy: StepPolicy,
    pub stats: StepStats,
}

impl<'a> LongRun<'a> {
    /// Starts at `s = 0` with the field-frame angle `theta0`.
    pub fn new(
        field: &'a CoefficientField,
        t: f64,
        theta0: f64,
        policy: StepPolicy,
    ) -> Result<Self> {
        policy.validate()?;
        let offset = field.analysis_offset();
        Ok(LongRun {
            field,
            t,
            scale: effective_scale(field),
            offset,
            u: 0.0,
            // κ(0) = 1, so ψ and θ agree at the start
            psi: theta0 - offset,
            h: policy.initial_step,
            policy,
            stats: StepStats::default(),
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn s(&self) -> f64 {
        self.u.exp_m1()
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn scale(&self) -> AngleScale {
        self.scale
    }

    fn kappa(&self, u: f64) -> f64 {
        match self.scale {
            AngleScale::Log => u.exp(),
            AngleScale::Unit => 1.0,
        }
    }

    /// The Prüfer angle in the field's frame.
    pub fn theta(&self) -> f64 {
        let k = ((self.psi + FRAC_PI_2) / PI).floor();
        let r = self.psi - k * PI;
        let (sr, cr) = r.sin_cos();
        k * PI + sr.atan2(self.kappa(self.u) * cr) + self.offset
    }

    /// Number of lines `π/2 + nπ` passed so far (signed); these are the
    /// zeros of the first solution component in the L² frame.
    pub fn crossing_index(&self) -> f64 {
        ((self.psi - FRAC_PI_2) / PI).floor()
    }

    pub fn advance(&mut self, u1: f64) -> Result<()> {
        if u1 <= self.u {
            return Ok(());
        }
        let field = self.field;
        let t = self.t;
        let scale = self.scale;
        let f = move |u: f64, psi: f64| {
            let s = u.exp_m1();
            let m = field.analysis_at_s(s);
            let (sp, cp) = psi.sin_cos();
            match scale {
                AngleScale::Log => {
                    let k = u.exp();
                    sp * cp
                        + t * (k * k * m.h11 * cp * cp
                            + 2.0 * k * m.h12 * sp * cp
                            + m.h22 * sp * sp)
                }
                AngleScale::Unit => {
                    u.exp() * t * (m.h11 * cp * cp + 2.0 * m.h12 * sp * cp + m.h22 * sp * sp)
                }
            }
        };
        self.psi = ode::integrate(
            f,
            self.u,
            self.psi,
            u1,
            &mut self.h,
            &self.policy,
            &mut self.stats,
            |_, y| y,
        )?;
        self.u = u1;
        Ok(())
    }
}

/// Long-horizon trajectory from `s = 0` to `s_end` via [`LongRun`],
/// sampled about 20 times per decade of `1 + s`. Sample positions are in
/// the field's own variable.
pub fn integrate_long(
    field: &CoefficientField,
    t: f64,
    theta0: f64,
    s_end: f64,
    policy: &StepPolicy,
) -> Result<PruferTrajectory> {
    if !(s_end > 0.0) || s_end > field.s_domain_end() {
        return Err(Error::InvalidParam(format!(
            "horizon {s_end} is outside the domain"
        )));
    }
    let mut run = LongRun::new(field, t, theta0, *policy)?;
    let mut samples = vec![PruferState {
        x: 0.0,
        theta: theta0,
    }];
    for s in checkpoints(0.0, s_end).into_iter().skip(1) {
        run.advance(s.ln_1p())?;
        samples.push(PruferState {
            x: field.x_of_s(s),
            theta: run.theta(),
        });
    }
    let end = samples.last().unwrap().theta;
    Ok(PruferTrajectory {
        samples,
        t,
        rotations: (end - theta0) / PI,
        step_stats: run.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::families::{constant_h, power_tail, section5, zero_phi};
    use crate::model::{from_phi_g, GridTable};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn rhs_examples() {
        let h = from_phi_g(0.4, 0.3, 1.0).unwrap();
        assert!((rhs(1.0, 0.0, &h) - 0.4f64.sin().powi(2)).abs() < 1e-15);
        let h = from_phi_g(0.4, 1.0, 1.0).unwrap();
        assert!((rhs(1.0, 0.9, &h) - 1.3f64.sin().powi(2)).abs() < 1e-15);
        let h = from_phi_g(PI / 6.0, 0.0, 1.0).unwrap();
        assert!((rhs(2.0, FRAC_PI_2, &h) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn constant_half_identity() {
        let f = constant_h(FRAC_PI_4, 0.0).unwrap();
        let tr = integrate(&f, 1.0, 0.3, 0.0, 2.0 * PI, &StepPolicy::default()).unwrap();
        assert!((tr.samples.last().unwrap().theta - (0.3 + PI)).abs() < 1e-9);
        assert!((rotation_count(&tr) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_phi_stays_put() {
        let f = zero_phi();
        for t in [-3.0, 0.5, 7.0] {
            let tr = integrate(&f, t, 0.0, 0.0, 1e3, &StepPolicy::default()).unwrap();
            assert!(tr.samples.iter().all(|p| p.theta == 0.0));
        }
    }

    #[test]
    fn constant_advance_matches_ode() {
        let m = HMatrix::new(0.3, -0.2, 0.9);
        let pol = StepPolicy::with_tolerances(1e-12, 1e-14);
        let mut h = 1e-3;
        let mut st = StepStats::default();
        for &(t, th0, dx) in &[(1.0, 0.2, 5.0), (-2.0, 1.7, 3.3), (0.7, -2.0, 40.0)] {
            let exact = constant_advance(&m, t, th0, dx);
            let num = ode::integrate(
                |_, th| rhs(t, th, &m),
                0.0,
                th0,
                dx,
                &mut h,
                &pol,
                &mut st,
                |_, y| y,
            )
            .unwrap();
            assert!((exact - num).abs() < 1e-9, "{exact} vs {num}");
        }
        let rank_one = from_phi_g(0.5, 1.0, 1.0).unwrap();
        let exact = constant_advance(&rank_one, 1.0, 0.0, 10.0);
        let num = ode::integrate(
            |_, th| rhs(1.0, th, &rank_one),
            0.0,
            0.0,
            10.0,
            &mut h,
            &pol,
            &mut st,
            |_, y| y,
        )
        .unwrap();
        assert!((exact - num).abs() < 1e-8);
    }

    #[test]
    fn grid_matches_smooth_constant() {
        let g = GridTable::new(&[(0.0, 0.6, 0.4, 1.0), (1.0, 0.6, 0.4, 1.0)]).unwrap();
        let f = crate::model::families::grid_sampled(g, false).unwrap();
        let c = constant_h(0.6, 0.4).unwrap();
        let a = integrate(&f, 1.3, 0.1, 0.0, 50.0, &StepPolicy::default()).unwrap();
        let b = integrate(&c, 1.3, 0.1, 0.0, 50.0, &StepPolicy::default()).unwrap();
        let (ta, tb) = (
            a.samples.last().unwrap().theta,
            b.samples.last().unwrap().theta,
        );
        assert!((ta - tb).abs() < 1e-7);
    }

    #[test]
    fn raw_exponential_field_reports_stiffness() {
        let f = section5();
        let pol = StepPolicy {
            max_steps: 100_000,
            ..StepPolicy::default()
        };
        let r = integrate(&f, 1.0, 0.0, 0.0, 60.0, &pol);
        assert!(matches!(
            r,
            Err(Error::StepBudget { .. }) | Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn long_route_agrees_with_plain_route() {
        for (field, t) in [
            (power_tail(1.0, 2.0, 0.0).unwrap(), 0.7),
            (power_tail(0.6, 2.0, 0.8).unwrap(), 0.3),
            (section5().trace_normalize(), 1.0),
            (power_tail(1.0, 2.0, 0.0).unwrap().rotated(0.3), -0.9),
        ] {
            let pol = StepPolicy::with_tolerances(1e-11, 1e-13);
            let plain = integrate(&field, t, 0.2, 0.0, 500.0, &pol).unwrap();
            let long = integrate_long(&field, t, 0.2, 500.0, &pol).unwrap();
            let a = plain.samples.last().unwrap().theta;
            let b = long.samples.last().unwrap().theta;
            assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", field.label());
        }
    }
}
