//! Rotations, the canonical system of a Schrödinger operator, and the Dirac
//! potential of a determinant-one diagonal system.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{AngleScale, ArclengthTable, CoefficientField, HMatrix, ScalarFn, TraceModel};

/// `R^* H R` with `R` the rotation by `alpha`. The spectrum is unchanged.
pub fn rotate(field: &CoefficientField, alpha: f64) -> CoefficientField {
    field.rotated(alpha)
}

/// Solutions `p`, `q` of `-y'' + V y = 0` with their derivatives.
#[derive(Clone)]
pub struct SolutionPair {
    pub p: ScalarFn,
    pub dp: ScalarFn,
    pub q: ScalarFn,
    pub dq: ScalarFn,
}

impl SolutionPair {
    pub fn new(
        p: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SolutionPair {
            p: Arc::new(p),
            dp: Arc::new(dp),
            q: Arc::new(q),
            dq: Arc::new(dq),
        }
    }

    pub fn wronskian(&self, x: f64) -> f64 {
        (self.dp)(x) * (self.q)(x) - (self.dq)(x) * (self.p)(x)
    }
}

/// The rank-one system `H = [[p², pq], [pq, q²]]` on `[0, x_end]`, whose
/// spectral problem is that of `-y'' + V y` on the same interval.
///
/// The Wronskian `p'q - q'p` must equal 1 (checked to 1e-10 at 65 points).
/// The arclength `∫ (p² + q²)` is tabulated.
pub fn schrodinger_to_canonical(pair: &SolutionPair, x_end: f64) -> Result<CoefficientField> {
    if !(x_end > 0.0 && x_end.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "x_end = {x_end} must be positive"
        )));
    }
    for i in 0..=64 {
        let x = x_end * i as f64 / 64.0;
        let w = pair.wronskian(x);
        if (w - 1.0).abs() > 1e-10 {
            return Err(Error::Wronskian { x, value: w });
        }
    }
    let (p, q) = (pair.p.clone(), pair.q.clone());
    let base = move |x: f64| {
        let (a, b) = (p(x), q(x));
        HMatrix::new(a * a, a * b, b * b).normalized()
    };
    let (p, q) = (pair.p.clone(), pair.q.clone());
    let trace: ScalarFn = Arc::new(move |x| {
        let (a, b) = (p(x), q(x));
        a * a + b * b
    });
    let table = ArclengthTable::uniform(trace, x_end, x_end / 512.0)?;
    Ok(
        CoefficientField::from_matrix_fn("schrodinger_to_canonical", base)
            .with_trace(TraceModel::Tabulated(Arc::new(table)))
            .with_note("rank-one system built from a solution pair; not trace normed"),
    )
}

/// How `a'` is obtained for [`diagonal_to_dirac`].
#[derive(Clone)]
pub enum Derivative {
    Exact(ScalarFn),
    /// Central difference with the given step.
    Central(f64),
}

/// `W = a'/(2a)` for `H_d = diag(a, 1/a)`.
#[derive(Clone)]
pub struct DiracPotential {
    w: ScalarFn,
}

impl DiracPotential {
    pub fn at(&self, x: f64) -> f64 {
        (self.w)(x)
    }
}

/// Dirac potential of a diagonal field with `det H ≡ 1`; the determinant is
/// checked to 1e-10 at `samples`.
pub fn diagonal_to_dirac(
    field: &CoefficientField,
    derivative: Derivative,
    samples: &[f64],
) -> Result<DiracPotential> {
    if !field.is_diagonal() {
        return Err(Error::Precondition(format!(
            "`{}` is not diagonal",
            field.label()
        )));
    }
    for &x in samples {
        let h = field.h_at(x)?;
        let det = h.h11 * h.h22;
        if (det - 1.0).abs() > 1e-10 {
            return Err(Error::Determinant { x, value: det });
        }
    }
    let f = field.clone();
    let a = move |x: f64| f.h_at(x).map(|h| h.h11).unwrap_or(f64::NAN);
    let w: ScalarFn = match derivative {
        Derivative::Exact(da) => Arc::new(move |x| da(x) / (2.0 * a(x))),
        Derivative::Central(step) => {
            if !(step > 0.0) {
                return Err(Error::InvalidParam(
                    "difference step must be positive".into(),
                ));
            }
            Arc::new(move |x| {
                let lo = (x - step).max(0.0);
                let hi = x + step;
                (a(hi) - a(lo)) / (hi - lo) / (2.0 * a(x))
            })
        }
    };
    Ok(DiracPotential { w })
}

/// Rotates so that `v` becomes `e1` and declares `e1` square integrable:
/// the caller asserts `∫ v^* H v < ∞`.
pub fn align_l2_direction(field: &CoefficientField, v: (f64, f64)) -> Result<CoefficientField> {
    if v.0 == 0.0 && v.1 == 0.0 || !v.0.is_finite() || !v.1.is_finite() {
        return Err(Error::ZeroVector);
    }
    let alpha = v.1.atan2(v.0);
    Ok(field
        .rotated(alpha)
        .with_l2_direction(0.0)
        .with_scale(AngleScale::Log))
}
