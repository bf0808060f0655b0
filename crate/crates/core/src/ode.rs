//! Scalar Dormand–Prince 5(4) integrator with embedded error control.
//!
//! Every equation in this crate is a scalar first-order ODE (a Prüfer-type
//! angle or a Riccati variable), so the stepper is specialised to `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and budgets for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u64,
    /// Smallest step allowed, relative to `max(1, |x|)`.
    pub min_step_rel: f64,
    pub initial_step: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 10_000_000,
            min_step_rel: 1e-14,
            initial_step: 1e-3,
        }
    }
}

impl StepPolicy {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        StepPolicy {
            rtol,
            atol,
            ..StepPolicy::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0
            && self.atol > 0.0
            && self.min_step_rel > 0.0
            && self.initial_step > 0.0)
        {
            return Err(Error::InvalidParam(
                "step policy tolerances must be positive".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParam("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: u64,
    pub rejected: u64,
    /// Largest accepted normalised local error estimate (<= 1 by construction).
    pub max_error: f64,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.max_error = self.max_error.max(other.max_error);
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(x, y)` from `x0` to `x1 > x0`.
///
/// `h` carries the step size between calls so consecutive segments reuse
/// the last accepted step. `post` sees `(y_old, y_new)` after every accepted
/// step and may adjust the new value (used for the monotone clamp).
pub(crate) fn integrate<F, P>(
    mut f: F,
    x0: f64,
    y0: f64,
    x1: f64,
    h: &mut f64,
    policy: &StepPolicy,
    stats: &mut StepStats,
    mut post: P,
) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
    P: FnMut(f64, f64) -> f64,
{
    debug_assert!(x1 >= x0);
    let mut x = x0;
    let mut y = y0;
    if x1 == x0 {
        return Ok(y);
    }
    if !h.is_finite() || *h <= 0.0 {
        *h = policy.initial_step;
    }
    let mut k1 = f(x, y);
    if !k1.is_finite() {
        return Err(Error::NonFinite { x });
    }
    let span = x1 - x0;
    loop {
        let remaining = x1 - x;
        if remaining <= 0.0 {
            return Ok(y);
        }
        let min_step = policy.min_step_rel * x.abs().max(1.0);
        let last = *h >= remaining;
        let step = if last { remaining } else { *h };
        if stats.steps >= policy.max_steps {
            return Err(Error::StepBudget {
                x,
                steps: policy.max_steps,
            });
        }
        if step < min_step && remaining > min_step && step < span {
            return Err(Error::StepUnderflow { x });
        }

        let k2 = f(x + C2 * step, y + step * A21 * k1);
        let k3 = f(x + C3 * step, y + step * (A31 * k1 + A32 * k2));
        let k4 = f(x + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(
            x + C5 * step,
            y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        );
        let k6 = f(
            x + step,
            y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let x_new = if last { x1 } else { x + step };
        let k7 = f(x_new, y_new);
        let err_abs = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = policy.atol + policy.rtol * y.abs().max(y_new.abs());
        let err = (err_abs / scale).abs();

        if !err.is_finite() || !y_new.is_finite() {
            stats.rejected += 1;
            *h = step * 0.2;
            if *h < min_step {
                return Err(Error::NonFinite { x });
            }
            continue;
        }

        if err <= 1.0 {
            stats.steps += 1;
            stats.max_error = stats.max_error.max(err);
            let adjusted = post(y, y_new);
            x = x_new;
            y = adjusted;
            k1 = if adjusted == y_new { k7 } else { f(x, y) };
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // keep a long final step from shrinking the carried size
            if !last || factor > 1.0 {
                *h = step * factor;
            }
        } else {
            stats.rejected += 1;
            *h = step * (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(f: impl FnMut(f64, f64) -> f64, x0: f64, y0: f64, x1: f64, pol: &StepPolicy) -> f64 {
        let mut h = pol.initial_step;
        let mut st = StepStats::default();
        integrate(f, x0, y0, x1, &mut h, pol, &mut st, |_, y| y).unwrap()
    }

    #[test]
    fn exponential_growth() {
        let pol = StepPolicy::with_tolerances(1e-11, 1e-14);
        let y = run(|_, y| y, 0.0, 1.0, 3.0, &pol);
        assert!((y - 3f64.exp()).abs() < 1e-9 * 3f64.exp());
    }

    #[test]
    fn riccati_blowup_free_segment() {
        // y' = 1 + y^2, y(0) = 0  =>  y = tan x
        let pol = StepPolicy::with_tolerances(1e-12, 1e-14);
        let y = run(|_, y| 1.0 + y * y, 0.0, 0.0, 1.2, &pol);
        assert!((y - 1.2f64.tan()).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let pol = StepPolicy {
            max_steps: 5,
            ..StepPolicy::default()
        };
        let mut h = 1e-3;
        let mut st = StepStats::default();
        let r = integrate(
            |x, _| (50.0 * x).cos(),
            0.0,
            0.0,
            100.0,
            &mut h,
            &pol,
            &mut st,
            |_, y| y,
        );
        assert!(matches!(r, Err(Error::StepBudget { .. })));
    }

    #[test]
    fn post_hook_can_clamp() {
        let pol = StepPolicy::default();
        let mut h = 0.1;
        let mut st = StepStats::default();
        let y = integrate(
            |_, _| -1.0,
            0.0,
            0.0,
            1.0,
            &mut h,
            &pol,
            &mut st,
            |old: f64, new: f64| new.max(old),
        )
        .unwrap();
        assert_eq!(y, 0.0);
    }
}
