use std::f64::consts::PI;
use std::sync::OnceLock;

use canosc::model::families::{power_tail, section5, section5_diagonal, zero_phi};
use canosc::schrodinger::{negative_spectrum_finite, NegativeSpectrum, SchrodingerPolicy};
use canosc::spectrum::{classify, m_estimate, ClassifyPolicy, SpectralEstimate, VerdictKind};
use canosc::{CoefficientField, Interval};
use proptest::prelude::*;

fn families() -> [CoefficientField; 5] {
    [
        power_tail(1.0, 2.0, 0.0).unwrap(),
        power_tail(0.3, 2.0, 0.5).unwrap(),
        section5(),
        section5_diagonal(),
        zero_phi(),
    ]
}

fn reference() -> &'static Vec<SpectralEstimate> {
    static REF: OnceLock<Vec<SpectralEstimate>> = OnceLock::new();
    REF.get_or_init(|| {
        families()
            .iter()
            .map(|f| m_estimate(f, &ClassifyPolicy::default()).unwrap())
            .collect()
    })
}

fn same_bracket(a: &Interval, b: &Interval) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a.is_infinite() && b.is_infinite();
    }
    a.overlaps(b)
}

fn t_grid(lo: f64, ratio: f64) -> Vec<f64> {
    (0..8).map(|k| lo * ratio.powi(k)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn m_bracket_is_rotation_invariant(i in 0usize..5, alpha in -PI..PI) {
        let f = families()[i].rotated(alpha);
        let e = m_estimate(&f, &ClassifyPolicy::default()).unwrap();
        let r = &reference()[i];
        prop_assert!(same_bracket(&e.m, &r.m), "{}: {} vs {}", f.label(), e.m, r.m);
    }

    #[test]
    fn oscillation_is_upward_closed(
        c in 0.05..=1.0f64, p in 1.5..3.0f64, g in 0.0..=1.0f64, alpha in -PI..PI,
        lo in 0.02..1.0f64, ratio in 1.1..2.0f64, negative in any::<bool>(),
    ) {
        let f = power_tail(c, p, g).unwrap().rotated(alpha);
        let sign = if negative { -1.0 } else { 1.0 };
        let mut seen = false;
        for t in t_grid(lo, ratio) {
            match classify(&f, sign * t, &ClassifyPolicy::default()).unwrap().kind {
                VerdictKind::Oscillatory => seen = true,
                VerdictKind::NonOscillatory => prop_assert!(!seen, "non-oscillatory at t = {} after an oscillatory probe", sign * t),
                VerdictKind::Inconclusive => {}
            }
        }
    }

    #[test]
    fn verdict_does_not_depend_on_the_initial_angle(
        c in 0.05..=1.0f64, p in 1.5..3.0f64, g in 0.0..=1.0f64, t in 0.02..5.0f64, th0 in -PI..PI,
    ) {
        let f = power_tail(c, p, g).unwrap();
        let a = classify(&f, t, &ClassifyPolicy::default()).unwrap().kind;
        let b = classify(&f, t, &ClassifyPolicy { theta0: th0, ..ClassifyPolicy::default() }).unwrap().kind;
        let contradict = matches!(
            (a, b),
            (VerdictKind::Oscillatory, VerdictKind::NonOscillatory) | (VerdictKind::NonOscillatory, VerdictKind::Oscillatory)
        );
        prop_assert!(!contradict, "t = {t}: {a:?} vs {b:?}");
    }

    #[test]
    fn negative_spectrum_switches_once(
        c in 0.1..=1.0f64, p in 1.5..3.0f64, lo in 0.05..0.5f64, ratio in 1.1..1.6f64,
    ) {
        let f = power_tail(c, p, 0.0).unwrap();
        let mut seen = false;
        for t in t_grid(lo, ratio) {
            match negative_spectrum_finite(&f, t, &SchrodingerPolicy::default()).unwrap().kind {
                NegativeSpectrum::Infinite => seen = true,
                NegativeSpectrum::Finite => prop_assert!(!seen, "finite at t = {t} after infinite"),
                NegativeSpectrum::Inconclusive => {}
            }
        }
    }

    #[test]
    fn full_edge_at_least_half_the_diagonal_edge(
        c in 0.05..=1.0f64, p in 1.5..2.5f64, g in 0.0..=1.0f64,
    ) {
        let f = power_tail(c, p, g).unwrap();
        let policy = ClassifyPolicy::default();
        let m = m_estimate(&f, &policy).unwrap().m;
        let m_d = m_estimate(&f.diagonal_part(), &policy).unwrap().m;
        if m_d.is_bounded() {
            prop_assert!(m.hi >= 0.5 * m_d.lo * (1.0 - 0.02), "{m} vs {m_d}");
        } else {
            prop_assert!(m.hi >= 0.5 * m_d.lo);
        }
    }
}
