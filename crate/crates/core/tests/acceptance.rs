use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use canosc::bounds::{tail_stats, thm13_interval, thm14_upper, TailPolicy};
use canosc::model::families::{power_tail, section5, section5_diagonal, zero_phi};
use canosc::schrodinger::{
    negative_spectrum_finite, riccati_crosscheck, s_bracket, shoot_zero_energy, NegativeSpectrum,
    SchrodingerPolicy,
};
use canosc::spectrum::{classify, m_estimate, ClassifyPolicy, VerdictKind};
use canosc::transforms::{diagonal_to_dirac, Derivative};
use canosc::verify::property_suites;
use canosc::Interval;

struct Line {
    id: &'static str,
    passed: bool,
    detail: String,
}

// written to the real stdout so the lines survive the test harness capture
fn report(line: &Line, secs: f64) {
    let verdict = if line.passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{} {verdict} ({secs:.2} s) {}", line.id, line.detail);
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn ac1() -> Line {
    let start = Instant::now();
    let e = m_estimate(&section5(), &ClassifyPolicy::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: "AC1",
        passed: e.m.contains(0.25) && e.m.width() <= 0.05 && secs <= 120.0,
        detail: format!("M in {} (width {:.4})", e.m, e.m.width()),
    }
}

fn ac2() -> Line {
    let policy = ClassifyPolicy::default();
    let d = m_estimate(&section5_diagonal(), &policy).unwrap().m;
    let m = m_estimate(&section5(), &policy).unwrap().m;
    // M / M_d lies in [m.lo / d.hi, m.hi / d.lo]
    let ratio = Interval::new(m.lo / d.hi, m.hi / d.lo);
    Line {
        id: "AC2",
        passed: d.contains(0.5) && d.width() <= 0.05 && ratio.contains(0.5),
        detail: format!("M_d in {d}, M / M_d in {ratio}"),
    }
}

fn ac3() -> Line {
    let f = power_tail(1.0, 2.0, 0.0).unwrap();
    let e = m_estimate(&f, &ClassifyPolicy::default()).unwrap();
    let exact = tail_stats(&f, &TailPolicy::default()).unwrap();
    let quad = tail_stats(
        &f,
        &TailPolicy {
            use_exact: false,
            ..TailPolicy::default()
        },
    )
    .unwrap();
    let inconclusive: Vec<f64> = e
        .plus
        .inconclusive()
        .into_iter()
        .chain(e.minus.inconclusive())
        .collect();
    let passed = e.m.contains(0.5)
        && e.m.width() <= 0.2
        && exact.a_hat == 1.0
        && exact.b_hat == 1.0
        && close(quad.a_hat, 1.0, 1e-3)
        && close(quad.b_hat, 1.0, 1e-3);
    Line {
        id: "AC3",
        passed,
        detail: format!(
            "M in {}, inconclusive probes at t = {inconclusive:?}; quadrature A = {:.6}, B = {:.6}",
            e.m, quad.a_hat, quad.b_hat
        ),
    }
}

fn ac4() -> Line {
    // [1/(2√A), 1/√A] and 1/(2√B) by hand
    let i = thm13_interval(1.0).unwrap();
    let u = thm14_upper(1.0).unwrap();
    let z = thm13_interval(0.0).unwrap();
    let passed = close(i.lo, 0.5, 1e-12)
        && close(i.hi, 1.0, 1e-12)
        && close(u, 0.5, 1e-12)
        && z.is_infinite();
    Line {
        id: "AC4",
        passed,
        detail: format!("A = 1 gives {i}, B = 1 gives {u}, A = 0 gives {z}"),
    }
}

fn ac5() -> Line {
    let f = power_tail(1.0, 2.0, 0.0).unwrap();
    let pol = SchrodingerPolicy::default();
    let s = s_bracket(&f, &pol).unwrap();
    let timed = |t: f64| {
        let start = Instant::now();
        let v = negative_spectrum_finite(&f, t, &pol).unwrap();
        (v.kind, start.elapsed().as_secs_f64())
    };
    let (below, below_secs) = timed(0.4);
    let (above, above_secs) = timed(1.0);
    // -y'' - y / (1+x)^2 = 0 has y = √(1+x) (A cos + B sin)(β ln(1+x)), β = √3/2,
    // so zeros on [0, X] are spaced π/β apart in ln(1+x)
    let beta = 0.75f64.sqrt();
    let oracle = (beta * 1e6f64.ln_1p() / PI).floor() as i64;
    let count = shoot_zero_energy(&f, 1.0, 1e6, &pol.step)
        .unwrap()
        .final_count() as i64;
    let passed = s.bracket.overlaps(&Interval::new(0.45, 0.55))
        && below == NegativeSpectrum::Finite
        && above == NegativeSpectrum::Infinite
        && below_secs <= 60.0
        && above_secs <= 60.0
        && (count - oracle).abs() <= 1;
    Line {
        id: "AC5",
        passed,
        detail: format!(
            "S in {}; t = 0.4 {below:?} ({below_secs:.2} s), t = 1 {above:?} ({above_secs:.2} s); {count} zeros, expected {oracle}",
            s.bracket
        ),
    }
}

fn ac6() -> Line {
    let f = power_tail(1.0, 3.0, 0.0).unwrap();
    let policy = ClassifyPolicy::default();
    let mut probes = 0;
    let mut bad = Vec::new();
    for k in 0..=16 {
        let t = 10f64.powf(-2.0 + 0.25 * k as f64);
        for t in [t, -t] {
            probes += 1;
            if classify(&f, t, &policy).unwrap().kind != VerdictKind::NonOscillatory {
                bad.push(t);
            }
        }
    }
    let m = m_estimate(&f, &policy).unwrap().m;
    Line {
        id: "AC6",
        passed: bad.is_empty() && m.is_infinite(),
        detail: format!("{probes} probes up to |t| = 100, failing at {bad:?}; M = {m}"),
    }
}

fn ac7() -> Line {
    let d = section5_diagonal();
    let xs: Vec<f64> = (0..100).map(|i| 0.2 * i as f64).collect();
    let w = diagonal_to_dirac(&d, Derivative::Exact(Arc::new(|x: f64| x.exp())), &xs).unwrap();
    let worst = xs
        .iter()
        .map(|&x| (w.at(x) - 0.5).abs())
        .fold(0.0, f64::max);
    Line {
        id: "AC7",
        passed: worst < 1e-12,
        detail: format!("max |W - 1/2| = {worst:.2e} over {} points", xs.len()),
    }
}

fn ac8() -> Line {
    let r = property_suites(200, 0x5eed);
    Line {
        id: "AC8",
        passed: r.passed,
        detail: r.detail,
    }
}

fn ac9() -> Line {
    let free = riccati_crosscheck(&zero_phi(), 1.0, 1.0, 1e6).unwrap();
    let pow = riccati_crosscheck(&power_tail(1.0, 2.0, 0.0).unwrap(), 0.3, 1.0, 1e6).unwrap();
    Line {
        id: "AC9",
        passed: free < 1e-6 && pow < 1e-6,
        detail: format!("residual {free:.2e} (free), {pow:.2e} (c = 1, p = 2)"),
    }
}

#[test]
fn acceptance_criteria() {
    let checks: [fn() -> Line; 9] = [ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stdout().lock());
    for check in checks {
        let start = Instant::now();
        let line = check();
        report(&line, start.elapsed().as_secs_f64());
        if !line.passed {
            failed.push(line.id);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
