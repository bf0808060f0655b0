//! Builtin coefficient fields with known oscillation thresholds.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

use super::field::{
    AnalyticTail, AngleScale, ArclengthTable, CoefficientField, GridTable, TraceModel,
};
use super::hmatrix::{from_phi_g, HMatrix};
use crate::error::{Error, Result};

pub const FAMILY_NAMES: [&str; 6] = [
    "power_tail",
    "section5",
    "section5_diagonal",
    "zero_phi",
    "constant_H",
    "grid_sampled",
];

/// Named numeric parameters for [`builtin_family`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyParams {
    pub values: BTreeMap<String, f64>,
    pub grid: Option<GridTable>,
    /// For `grid_sampled`: declare `e1` as an L² direction.
    pub l2: bool,
}

impl FamilyParams {
    pub fn new() -> Self {
        FamilyParams::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }

    fn only(&self, family: &str, allowed: &[&str]) -> Result<()> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::InvalidParam(format!(
                    "family `{family}` has no parameter `{k}` (expected one of {allowed:?})"
                )));
            }
        }
        for (k, v) in &self.values {
            if !v.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "parameter `{k}` = {v} is not finite"
                )));
            }
        }
        Ok(())
    }
}

pub fn builtin_family(name: &str, params: &FamilyParams) -> Result<CoefficientField> {
    match name {
        "power_tail" => {
            params.only(name, &["c", "p", "g"])?;
            power_tail(
                params.get("c", 1.0),
                params.get("p", 2.0),
                params.get("g", 0.0),
            )
        }
        "section5" => {
            params.only(name, &[])?;
            Ok(section5())
        }
        "section5_diagonal" => {
            params.only(name, &[])?;
            Ok(section5_diagonal())
        }
        "zero_phi" => {
            params.only(name, &[])?;
            Ok(zero_phi())
        }
        "constant_H" => {
            params.only(name, &["phi", "g"])?;
            constant_h(params.get("phi", FRAC_PI_4), params.get("g", 0.0))
        }
        "grid_sampled" => {
            params.only(name, &[])?;
            let grid = params
                .grid
                .clone()
                .ok_or_else(|| Error::InvalidParam("grid_sampled needs a sample table".into()))?;
            grid_sampled(grid, params.l2)
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

/// `sin²φ = c (1 + x)^-p`, constant `g`, trace one.
pub fn power_tail(c: f64, p: f64, g: f64) -> Result<CoefficientField> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Range {
            name: "c",
            value: c,
            expected: "0 <= c <= 1",
        });
    }
    if !(p > 1.0) {
        return Err(Error::Range {
            name: "p",
            value: p,
            expected: "p > 1 (sin phi must be square integrable)",
        });
    }
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::Range {
            name: "g",
            value: g,
            expected: "0 <= g <= 1",
        });
    }
    let base = move |x: f64| {
        let a = c * (-p * x.ln_1p()).exp();
        HMatrix::new(a, g * (a * (1.0 - a)).sqrt(), 1.0 - a)
    };
    let w = move |x: f64| c * (-(p - 1.0) * x.ln_1p()).exp() / (p - 1.0);
    let xw = move |x: f64| x * w(x);
    let (a_exact, sup_from): (f64, Box<dyn Fn(f64) -> f64 + Send + Sync>) = if c == 0.0 {
        (0.0, Box::new(|_| 0.0))
    } else if p < 2.0 {
        (f64::INFINITY, Box::new(|_| f64::INFINITY))
    } else if p == 2.0 {
        (c, Box::new(move |_| c))
    } else {
        // x W(x) rises to its peak at x = 1/(p-2), then decays
        let peak = 1.0 / (p - 2.0);
        (0.0, Box::new(move |a: f64| xw(a.max(peak))))
    };
    let mut field =
        CoefficientField::from_matrix_fn(format!("power_tail(c={c},p={p},g={g})"), base)
            .with_l2_direction(0.0)
            .with_tail(AnalyticTail::new(w, sup_from, a_exact, a_exact))
            .with_diagonal_base(g == 0.0)
            .with_scale(AngleScale::Log);
    if c == 0.0 {
        field = field.with_support_end(0.0);
    }
    Ok(field)
}

/// `H = [[e^x, 1], [1, e^-x]]`, the rank-one system of the free Schrödinger
/// operator with potential 1/4.
pub fn section5() -> CoefficientField {
    section5_impl(false)
}

/// `H_d = diag(e^x, e^-x)`.
pub fn section5_diagonal() -> CoefficientField {
    section5_impl(true)
}

fn section5_impl(diagonal: bool) -> CoefficientField {
    let base = move |x: f64| {
        let h11 = 1.0 / (1.0 + (-2.0 * x).exp());
        let h22 = 1.0 / (1.0 + (2.0 * x).exp());
        let h12 = if diagonal { 0.0 } else { 0.5 / x.cosh() };
        HMatrix::new(h11, h12, h22)
    };
    let trace = TraceModel::Analytic {
        trace: Arc::new(|x: f64| 2.0 * x.cosh()),
        arclength: Arc::new(|x: f64| 2.0 * x.sinh()),
        inverse: Arc::new(|s: f64| (0.5 * s).asinh()),
    };
    // in arclength s = 2 sinh x the e2 entry is sin²φ = (√(s²+4) - s) / (2√(s²+4))
    let w = |s: f64| 2.0 / (s + s.hypot(2.0));
    let label = if diagonal {
        "section5_diagonal"
    } else {
        "section5"
    };
    CoefficientField::from_matrix_fn(label, base)
        .with_trace(trace)
        .with_l2_direction(FRAC_PI_2)
        .with_tail(AnalyticTail::new(w, |_| 1.0, 1.0, 1.0))
        .with_diagonal_base(diagonal)
        .with_scale(AngleScale::Log)
}

/// `H ≡ diag(0, 1)`: every solution has a constant angle.
pub fn zero_phi() -> CoefficientField {
    CoefficientField::from_matrix_fn("zero_phi", |_| HMatrix::diag(0.0, 1.0))
        .with_l2_direction(0.0)
        .with_tail(AnalyticTail::zero())
        .with_support_end(0.0)
        .with_diagonal_base(true)
        .with_scale(AngleScale::Log)
}

/// Constant trace-one `H` given by `(phi, g)`.
pub fn constant_h(phi: f64, g: f64) -> Result<CoefficientField> {
    let h = from_phi_g(phi, g, 1.0)?;
    let mut field =
        CoefficientField::from_matrix_fn(format!("constant_H(phi={phi},g={g})"), move |_| h)
            .with_diagonal_base(g == 0.0 || h.h12 == 0.0);
    if h.h11 == 0.0 {
        field = field
            .with_l2_direction(0.0)
            .with_tail(AnalyticTail::zero())
            .with_support_end(0.0)
            .with_scale(AngleScale::Log);
    }
    Ok(field)
}

/// Piecewise-constant field from a sample table. With `l2`, `e1` is declared
/// square integrable, which requires `sin φ = 0` on the last cell.
pub fn grid_sampled(grid: GridTable, l2: bool) -> Result<CoefficientField> {
    let grid = Arc::new(grid);
    let last = grid.len() - 1;
    let (last_cell, _) = grid.cell(last);
    if l2 && last_cell.h11 != 0.0 {
        return Err(Error::InvalidParam(
            "an L² direction e1 needs sin phi = 0 on the last grid cell".into(),
        ));
    }
    let lookup = grid.clone();
    let mut field = CoefficientField::from_matrix_fn("grid_sampled", move |x| {
        lookup.cell(lookup.cell_index(x)).0
    })
    .with_diagonal_base((0..grid.len()).all(|i| grid.cell(i).0.h12 == 0.0));
    if !grid.has_unit_trace() {
        let tr_grid = grid.clone();
        let trace: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
            Arc::new(move |x| tr_grid.cell(tr_grid.cell_index(x)).1);
        let table =
            ArclengthTable::from_nodes(trace, grid.starts().to_vec(), Some(grid.cell(last).1))?;
        field = field.with_trace(TraceModel::Tabulated(Arc::new(table)));
    }
    if l2 {
        let end = field.s_of_x(grid.starts()[last]);
        field = field.with_l2_direction(0.0).with_support_end(end);
    }
    Ok(field.with_grid(grid))
}

/// `sin²φ = c/(1+x)²` on dyadic blocks `[2^k, 2^{k+1})` with even `k`
/// (and on `[0, 1)`), `c2/(1+x)²` on odd blocks. Its tail statistic
/// `x W(x)` keeps oscillating, so the limsup and liminf differ.
pub fn dyadic_modulated(c: f64, c2: f64) -> Result<CoefficientField> {
    for (name, v) in [("c", c), ("c2", c2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range {
                name,
                value: v,
                expected: "0 <= c <= 1",
            });
        }
    }
    let base = move |x: f64| {
        let k = if x < 1.0 { 0 } else { x.log2().floor() as i64 };
        let coef = if k % 2 == 0 { c } else { c2 };
        let a = coef / ((1.0 + x) * (1.0 + x));
        HMatrix::diag(a, 1.0 - a)
    };
    Ok(
        CoefficientField::from_matrix_fn(format!("dyadic_modulated(c={c},c2={c2})"), base)
            .with_l2_direction(0.0)
            .with_diagonal_base(true)
            .with_scale(AngleScale::Log),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn unknown_and_bad_params() {
        assert!(matches!(
            builtin_family("nope", &FamilyParams::new()),
            Err(Error::UnknownFamily(_))
        ));
        assert!(builtin_family("power_tail", &FamilyParams::new().with("p", 1.0)).is_err());
        assert!(builtin_family("power_tail", &FamilyParams::new().with("c", -0.1)).is_err());
        assert!(builtin_family("section5", &FamilyParams::new().with("c", 1.0)).is_err());
        assert!(builtin_family("grid_sampled", &FamilyParams::new()).is_err());
    }

    #[test]
    fn power_tail_exact_tails() {
        let f = power_tail(1.0, 2.0, 0.0).unwrap();
        let t = f.tail().unwrap();
        assert_eq!((t.a_exact, t.b_exact), (1.0, 1.0));
        let f = power_tail(1.0, 3.0, 0.0).unwrap();
        let t = f.tail().unwrap();
        assert_eq!((t.a_exact, t.b_exact), (0.0, 0.0));
        // sup of x/(2(1+x)^2) is 1/8 at x = 1
        assert!((t.sup_xw_from(0.0) - 0.125).abs() < 1e-15);
        assert!((t.sup_xw_from(3.0) - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn section5_at_origin() {
        let f = section5();
        let h = f.h_at(0.0).unwrap();
        assert!(h.max_abs_diff(&HMatrix::new(1.0, 1.0, 1.0)) < 1e-15);
        let h = f.h_at(2.0).unwrap();
        assert!(h.max_abs_diff(&HMatrix::new(2f64.exp(), 1.0, (-2f64).exp())) < 1e-13);
        let n = f.trace_normalize().h_at(0.0).unwrap();
        assert!(n.max_abs_diff(&HMatrix::new(0.5, 0.5, 0.5)) < 1e-15);
    }

    #[test]
    fn section5_normalized_tail_matches_quadrature() {
        let f = section5_diagonal().trace_normalize();
        let t = f.tail().unwrap();
        for &s in &[0.5, 3.0, 40.0, 1e3] {
            let sin2 = |r: f64| {
                let h = f.h_at(r).unwrap();
                h.h22
            };
            let closed = (r_sqrt(s) - s) / (2.0 * r_sqrt(s));
            assert!((sin2(s) - closed).abs() < 1e-14);
            let (v, _) = quad::integrate_log(sin2, s, 1e9, 1e-300, 1e-12);
            let w_tail = 1.0 / 1e9;
            assert!(((v + w_tail) - t.w(s)).abs() <= 1e-8 * t.w(s));
        }
    }

    fn r_sqrt(s: f64) -> f64 {
        (s * s + 4.0).sqrt()
    }

    #[test]
    fn grid_lookup_is_right_continuous() {
        let g = GridTable::new(&[(0.0, 0.5, 0.0, 1.0), (1.0, 0.0, 0.0, 1.0)]).unwrap();
        let f = grid_sampled(g, true).unwrap();
        assert_eq!(f.h_at(1.0).unwrap(), HMatrix::diag(0.0, 1.0));
        assert!(f.h_at(0.999).unwrap().h11 > 0.0);
        assert_eq!(f.support_end(), Some(1.0));
    }

    #[test]
    fn grid_from_csv() {
        let g = GridTable::from_csv("x,phi,g,trace\n0,0.3,0.5,2\n2,0,0,1\n").unwrap();
        let f = grid_sampled(g, true).unwrap();
        assert!((f.s_of_x(3.0) - 5.0).abs() < 1e-14);
        assert!((f.x_of_s(5.0) - 3.0).abs() < 1e-14);
        assert!((f.h_at(1.0).unwrap().trace() - 2.0).abs() < 1e-14);
        assert!(GridTable::from_csv("x,y\n0,1\n").is_err());
        assert!(GridTable::from_csv("x,phi,g\n1,0,0\n").is_err());
    }
}
