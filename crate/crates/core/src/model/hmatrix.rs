use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Symmetric 2x2 coefficient matrix `[[h11, h12], [h12, h22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HMatrix {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl HMatrix {
    pub const fn new(h11: f64, h12: f64, h22: f64) -> Self {
        HMatrix { h11, h12, h22 }
    }

    pub fn diag(h11: f64, h22: f64) -> Self {
        HMatrix::new(h11, 0.0, h22)
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.h11 + self.h22);
        let half_gap = (0.5 * (self.h11 - self.h22)).hypot(self.h12);
        (mean - half_gap, mean + half_gap)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().0 >= -tol
    }

    /// `e_theta^* H e_theta` with `e_theta = (cos theta, sin theta)`.
    pub fn quad_form(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.h11 * c * c + 2.0 * self.h12 * s * c + self.h22 * s * s
    }

    pub fn scaled(&self, k: f64) -> HMatrix {
        HMatrix::new(self.h11 * k, self.h12 * k, self.h22 * k)
    }

    pub fn diagonal(&self) -> HMatrix {
        HMatrix::diag(self.h11, self.h22)
    }

    /// Divides by the trace; the zero matrix is returned unchanged.
    pub fn normalized(&self) -> HMatrix {
        let tr = self.trace();
        if tr > 0.0 {
            self.scaled(1.0 / tr)
        } else {
            *self
        }
    }

    /// `R^* H R` with `R` the rotation by `alpha`. Multiples of a quarter
    /// turn are applied exactly so tiny entries keep full relative precision.
    pub fn rotated(&self, alpha: f64) -> HMatrix {
        if alpha == 0.0 {
            return *self;
        }
        let quarters = (alpha / FRAC_PI_2).round();
        let rest = alpha - quarters * FRAC_PI_2;
        let mut m = *self;
        if (quarters as i64).rem_euclid(2) == 1 {
            m = HMatrix::new(m.h22, -m.h12, m.h11);
        }
        if rest.abs() <= 4.0 * f64::EPSILON * alpha.abs().max(1.0) {
            return m;
        }
        let (s, c) = rest.sin_cos();
        HMatrix::new(
            c * c * m.h11 + 2.0 * c * s * m.h12 + s * s * m.h22,
            -c * s * m.h11 + (c * c - s * s) * m.h12 + c * s * m.h22,
            s * s * m.h11 - 2.0 * c * s * m.h12 + c * c * m.h22,
        )
    }

    pub fn max_abs_diff(&self, other: &HMatrix) -> f64 {
        (self.h11 - other.h11)
            .abs()
            .max((self.h12 - other.h12).abs())
            .max((self.h22 - other.h22).abs())
    }
}

/// The `(phi, g, trace)` description of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiG {
    pub phi: f64,
    pub g: f64,
    pub trace: f64,
    /// `sin(phi) cos(phi) = 0`: `g` cannot be recovered and is reported as 0.
    pub degenerate: bool,
}

/// Reduces an angle to `[-pi/2, pi/2)`.
pub fn reduce_angle(phi: f64) -> f64 {
    let r = phi - PI * ((phi + FRAC_PI_2) / PI).floor();
    if r >= FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// The projection onto `(sin beta, cos beta)`.
pub fn projection(beta: f64) -> HMatrix {
    let (s, c) = beta.sin_cos();
    HMatrix::new(s * s, s * c, c * c)
}

pub fn from_phi_g(phi: f64, g: f64, trace: f64) -> Result<HMatrix> {
    if !phi.is_finite() {
        return Err(Error::InvalidParam(format!("phi = {phi} is not finite")));
    }
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::Range {
            name: "g",
            value: g,
            expected: "0 <= g <= 1",
        });
    }
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Range {
            name: "trace",
            value: trace,
            expected: "trace > 0",
        });
    }
    let (s, c) = reduce_angle(phi).sin_cos();
    Ok(HMatrix::new(
        trace * s * s,
        trace * g * s * c,
        trace * c * c,
    ))
}

pub fn to_phi_g(h: &HMatrix) -> Result<PhiG> {
    let tr = h.trace();
    if !(tr > 0.0) {
        return Err(Error::NotPsd(format!("trace {tr} must be positive")));
    }
    if !h.is_psd(1e-12 * tr) {
        return Err(Error::NotPsd(format!("{h:?}")));
    }
    let a = h.h11.max(0.0);
    let b = h.h22.max(0.0);
    let phi_abs = a.sqrt().atan2(b.sqrt());
    let sc = (a * b).sqrt();
    if sc == 0.0 {
        // phi is 0 or -pi/2, g unrecoverable
        let phi = if phi_abs >= FRAC_PI_2 {
            -FRAC_PI_2
        } else {
            0.0
        };
        return Ok(PhiG {
            phi,
            g: 0.0,
            trace: tr,
            degenerate: true,
        });
    }
    let g = (h.h12.abs() / sc).min(1.0);
    let phi = if h.h12 < 0.0 { -phi_abs } else { phi_abs };
    Ok(PhiG {
        phi,
        g,
        trace: tr,
        degenerate: false,
    })
}

/// `lambda P_phi + (1 - lambda) P_{-phi}`: all trace-one matrices with the
/// diagonal of `P_phi`. `lambda = 1/2` is the diagonal part.
pub fn lambda_segment(phi: f64, lambda: f64) -> Result<HMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Range {
            name: "lambda",
            value: lambda,
            expected: "0 <= lambda <= 1",
        });
    }
    let (s, c) = phi.sin_cos();
    Ok(HMatrix::new(s * s, (2.0 * lambda - 1.0) * s * c, c * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: &HMatrix, b: &HMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn phi_g_examples() {
        let p = to_phi_g(&HMatrix::new(0.5, 0.0, 0.5)).unwrap();
        assert!((p.phi - FRAC_PI_4).abs() < 1e-15 && p.g == 0.0 && p.trace == 1.0);
        let p = to_phi_g(&HMatrix::new(1.0, 1.0, 1.0)).unwrap();
        assert!((p.phi - FRAC_PI_4).abs() < 1e-15 && (p.g - 1.0).abs() < 1e-15 && p.trace == 2.0);
        assert!(!p.degenerate);
    }

    #[test]
    fn round_trip_point() {
        let h = from_phi_g(0.3, 0.5, 1.0).unwrap();
        let p = to_phi_g(&h).unwrap();
        assert!((p.phi - 0.3).abs() < 1e-12 && (p.g - 0.5).abs() < 1e-12);
        let back = from_phi_g(p.phi, p.g, p.trace).unwrap();
        assert!(close(&h, &back, 1e-12));
    }

    #[test]
    fn degenerate_flag() {
        let p = to_phi_g(&HMatrix::diag(0.0, 1.0)).unwrap();
        assert!(p.degenerate && p.g == 0.0 && p.phi == 0.0);
        let p = to_phi_g(&HMatrix::diag(2.0, 0.0)).unwrap();
        assert!(p.degenerate && p.phi == -FRAC_PI_2);
    }

    #[test]
    fn segment_examples() {
        let phi = 0.7;
        let d = lambda_segment(phi, 0.5).unwrap();
        assert_eq!(d.h12, 0.0);
        assert!(close(
            &d,
            &HMatrix::diag(phi.sin().powi(2), phi.cos().powi(2)),
            1e-15
        ));
        assert!(close(
            &lambda_segment(phi, 1.0).unwrap(),
            &projection(phi),
            1e-15
        ));
        let m = lambda_segment(PI / 6.0, 0.75).unwrap();
        assert!((m.h11 - 0.25).abs() < 1e-15 && (m.h22 - 0.75).abs() < 1e-15);
        assert!((m.h12 - 0.5 * 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(lambda_segment(phi, 1.5).is_err());
    }

    #[test]
    fn quarter_turn_is_exact() {
        let h = HMatrix::new(1e-280, -3e-140, 1.0);
        let r = h.rotated(FRAC_PI_2);
        assert_eq!(r, HMatrix::new(1.0, 3e-140, 1e-280));
        assert_eq!(r.rotated(-FRAC_PI_2), h);
        assert_eq!(
            HMatrix::diag(0.0, 1.0).rotated(FRAC_PI_2),
            HMatrix::diag(1.0, 0.0)
        );
    }

    #[test]
    fn rotation_matches_quadratic_form_shift() {
        let h = HMatrix::new(0.2, 0.3, 0.8);
        let r = h.rotated(0.4);
        for k in 0..16 {
            let th = k as f64 * 0.37;
            assert!((r.quad_form(th) - h.quad_form(th + 0.4)).abs() < 1e-14);
        }
    }

    #[test]
    fn reduce_angle_range() {
        assert_eq!(reduce_angle(FRAC_PI_2), -FRAC_PI_2);
        assert!((reduce_angle(PI + 0.1) - 0.1).abs() < 1e-15);
        assert!((reduce_angle(-2.0) - (PI - 2.0)).abs() < 1e-15);
    }
}
