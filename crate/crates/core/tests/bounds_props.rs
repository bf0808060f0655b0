use canosc::bounds::{tail_stats, thm11_interval, thm13_interval, thm14_upper, TailPolicy};
use canosc::model::dyadic_modulated;
use canosc::model::families::power_tail;
use canosc::Interval;
use proptest::prelude::*;

fn quadrature() -> TailPolicy {
    TailPolicy {
        use_exact: false,
        ..TailPolicy::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tail_interval_is_antitone(a in 1e-6..1e3f64, k in 1.0..10.0f64) {
        let (lo, hi) = (thm13_interval(a).unwrap(), thm13_interval(a * k).unwrap());
        prop_assert!(hi.lo <= lo.lo && hi.hi <= lo.hi);
        prop_assert!(lo.lo <= lo.hi);
        // the interval is [1/(2√A), 1/√A]
        prop_assert!((lo.hi - 2.0 * lo.lo).abs() <= 1e-12 * lo.hi);
        prop_assert!((lo.lo * lo.lo * a - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn b_bound_is_antitone(b in 1e-6..1e3f64, k in 1.0..10.0f64) {
        let (x, y) = (thm14_upper(b).unwrap(), thm14_upper(b * k).unwrap());
        prop_assert!(y <= x);
        prop_assert!((x * x * b - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn comparison_interval_brackets_half_the_diagonal_edge(lo in 1e-3..10.0f64, w in 0.0..1.0f64) {
        let m_d = Interval::new(lo, lo * (1.0 + w));
        let i = thm11_interval(&m_d);
        prop_assert!((i.lo - 0.5 * m_d.lo).abs() <= 1e-12 * m_d.lo);
        prop_assert!(i.hi > m_d.hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_tail_statistics_are_c_over_p_minus_one_at_p_two(c in 0.05..=1.0f64, g in 0.0..=1.0f64) {
        let f = power_tail(c, 2.0, g).unwrap();
        let q = tail_stats(&f, &quadrature()).unwrap();
        prop_assert!((q.a_hat - c).abs() <= 1e-3 * c.max(0.1));
        prop_assert!((q.b_hat - c).abs() <= 1e-3 * c.max(0.1));
    }

    #[test]
    fn modulated_tail_has_distinct_limsup_and_liminf(c in 0.05..=1.0f64, d in 0.2..0.9f64) {
        let c2 = c * (1.0 - d);
        let f = dyadic_modulated(c, c2).unwrap();
        let q = tail_stats(&f, &quadrature()).unwrap();
        prop_assert!(q.a_hat > q.b_hat, "A = {}, B = {}", q.a_hat, q.b_hat);
        prop_assert!(q.a_hat <= c * (1.0 + 1e-3) && q.b_hat >= c2 * (1.0 - 1e-3));
    }
}
