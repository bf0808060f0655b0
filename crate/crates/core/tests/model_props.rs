use std::f64::consts::{FRAC_PI_2, PI};

use canosc::model::families::{power_tail, section5, section5_diagonal, zero_phi};
use canosc::model::{from_phi_g, lambda_segment, to_phi_g, HMatrix};
use canosc::transforms::rotate;
use canosc::CoefficientField;
use proptest::prelude::*;

fn family(i: usize, c: f64, p: f64, g: f64) -> CoefficientField {
    match i {
        0 => power_tail(c, p, g).unwrap(),
        1 => section5(),
        2 => section5_diagonal(),
        _ => zero_phi(),
    }
}

/// Simpson's rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn families_are_psd_with_the_declared_trace(
        i in 0usize..4, c in 0.0..=1.0f64, p in 1.2..4.0f64, g in 0.0..=1.0f64, lx in -3.0..6.0f64,
    ) {
        let f = family(i, c, p, g);
        let mut x = 10f64.powf(lx);
        if matches!(i, 1 | 2) {
            // e^x overflows past ~709
            x = x.min(300.0);
        }
        let h = f.h_at(x).unwrap();
        prop_assert!(h.is_psd(1e-12 * h.trace()));
        prop_assert!((h.trace() - f.trace_at(x)).abs() <= 1e-12 * h.trace());
    }

    #[test]
    fn phi_g_round_trip(phi in -FRAC_PI_2..FRAC_PI_2, g in 0.0..=1.0f64, tr in 1e-3..1e3f64) {
        let h = from_phi_g(phi, g, tr).unwrap();
        let back = to_phi_g(&h).unwrap();
        prop_assert!((back.trace - tr).abs() <= 1e-12 * tr);
        let again = from_phi_g(back.phi, back.g, back.trace).unwrap();
        prop_assert!(again.max_abs_diff(&h) <= 1e-10 * tr);
        if !back.degenerate && phi.abs() > 1e-3 && FRAC_PI_2 - phi.abs() > 1e-3 {
            prop_assert!((back.phi - phi).abs() <= 1e-9);
            prop_assert!((back.g - g).abs() <= 1e-6);
        }
    }

    #[test]
    fn phi_is_defined_mod_pi(phi in -10.0..10.0f64, g in 0.0..=1.0f64) {
        let a = from_phi_g(phi, g, 1.0).unwrap();
        let b = from_phi_g(phi + PI, g, 1.0).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn lambda_segment_keeps_the_diagonal(phi in -PI..PI, lambda in 0.0..=1.0f64) {
        let h = lambda_segment(phi, lambda).unwrap();
        let p = lambda_segment(phi, 1.0).unwrap();
        prop_assert!((h.trace() - 1.0).abs() < 1e-12);
        prop_assert!((h.h11 - p.h11).abs() < 1e-15 && (h.h22 - p.h22).abs() < 1e-15);
        prop_assert!(h.is_psd(1e-12));
        // lambda = 1 is a projection
        prop_assert!(p.det().abs() < 1e-12);
        prop_assert!(lambda_segment(phi, 0.5).unwrap().max_abs_diff(&p.diagonal()) < 1e-15);
    }

    #[test]
    fn rotation_keeps_trace_and_eigenvalues(
        i in 0usize..4, c in 0.0..=1.0f64, g in 0.0..=1.0f64, alpha in -10.0..10.0f64, x in 0.0..30.0f64,
    ) {
        let f = family(i, c, 2.0, g);
        let r = rotate(&f, alpha);
        let (h, hr) = (f.h_at(x).unwrap(), r.h_at(x).unwrap());
        let scale = h.trace();
        prop_assert!((h.trace() - hr.trace()).abs() <= 1e-12 * scale);
        let (a, b) = (h.eigenvalues(), hr.eigenvalues());
        prop_assert!((a.0 - b.0).abs() <= 1e-12 * scale && (a.1 - b.1).abs() <= 1e-12 * scale);
        let back = rotate(&r, -alpha).h_at(x).unwrap();
        prop_assert!(back.max_abs_diff(&h) <= 1e-12 * scale);
    }

    #[test]
    fn rotated_matrix_is_conjugation(
        h11 in 0.0..1.0f64, h22 in 0.0..1.0f64, frac in -1.0..=1.0f64, alpha in -PI..PI,
    ) {
        let h12 = frac * (h11 * h22).sqrt();
        let h = HMatrix::new(h11, h12, h22);
        let (s, c) = alpha.sin_cos();
        // R^T H R with R = [[c, -s], [s, c]]
        let r11 = c * (c * h11 + s * h12) + s * (c * h12 + s * h22);
        let r12 = c * (-s * h11 + c * h12) + s * (-s * h12 + c * h22);
        let r22 = -s * (-s * h11 + c * h12) + c * (-s * h12 + c * h22);
        prop_assert!(h.rotated(alpha).max_abs_diff(&HMatrix::new(r11, r12, r22)) < 1e-12);
    }

    #[test]
    fn trace_normalize_maps_x_to_arclength(x in 0.0..20.0f64, diag in any::<bool>()) {
        let f = if diag { section5_diagonal() } else { section5() };
        let n = f.trace_normalize();
        prop_assert!(n.trace_normed());
        let s = 2.0 * x.sinh();
        let (a, b) = (f.normalized_at(x).unwrap(), n.h_at(s).unwrap());
        prop_assert!(a.max_abs_diff(&b) < 1e-9);
        prop_assert!(n.validate(&[s]).is_ok());
    }

    #[test]
    fn power_tail_matches_quadrature(c in 0.05..=1.0f64, p in 1.5..4.0f64, x in 0.0..1e4f64) {
        let f = power_tail(c, p, 0.3).unwrap();
        let w = f.tail().unwrap().w(x);
        // y = x + e^v - 1 spreads the algebraic tail over a finite v range
        let integrand = |v: f64| {
            let y = x + v.exp() - 1.0;
            c * (1.0 + y).powf(-p) * v.exp()
        };
        let v_end = 80.0 / (p - 1.0);
        let q = simpson(integrand, 0.0, v_end, 20_000);
        prop_assert!((w - q).abs() <= 1e-6 * w, "closed form {w}, quadrature {q}");
    }
}
