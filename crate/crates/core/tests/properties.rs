//! Cross-module properties of the solvers.

use ambistop_core::linear::{self, compute_exponents, UcLinear};
use ambistop_core::radial::{self, RadialFundamentals, UcRadial};
use ambistop_core::{AmbiguityParams, Payoff, Regime, Solution};

const KAPPAS: [f64; 4] = [0.0, 0.01, 0.02, 0.05];

fn digital() -> Payoff {
    Payoff::DigitalAsymmetric { k1: 1.0, k2: 0.5, k3: 0.35 }
}

struct Case {
    name: &'static str,
    solve: fn(f64) -> Solution,
    lo: f64,
    hi: f64,
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "digital",
            solve: |k| linear::solve(&AmbiguityParams::linear(k, 0.02, 0.1).unwrap(), &digital()).unwrap(),
            lo: -1.5,
            hi: 1.0,
        },
        Case {
            name: "digital k3 = 0.7",
            solve: |k| {
                let f = Payoff::DigitalAsymmetric { k1: 1.0, k2: 0.5, k3: 0.7 };
                linear::solve(&AmbiguityParams::linear(k, 0.02, 0.1).unwrap(), &f).unwrap()
            },
            lo: -1.5,
            hi: 1.0,
        },
        Case {
            name: "even kink",
            solve: |k| {
                linear::solve(&AmbiguityParams::linear(k, 0.02, 0.1).unwrap(), &Payoff::EvenKink { k1: 1.0 }).unwrap()
            },
            lo: -1.0,
            hi: 1.0,
        },
        Case {
            name: "periodic cosine",
            solve: |k| linear::solve(&AmbiguityParams::linear(k, 0.03, 0.1).unwrap(), &Payoff::PeriodicCosine).unwrap(),
            lo: -7.0,
            hi: 7.0,
        },
        Case {
            name: "straddle K = 4",
            solve: |k| {
                let p = AmbiguityParams::radial(k, 0.1, 5).unwrap();
                radial::solve(&p, &Payoff::Straddle { strike: 4.0 }, None).unwrap()
            },
            lo: 0.05,
            hi: 120.0,
        },
        Case {
            name: "straddle K = 0.85",
            solve: |k| {
                let p = AmbiguityParams::radial(k, 0.1, 5).unwrap();
                radial::solve(&p, &Payoff::Straddle { strike: 0.85 }, None).unwrap()
            },
            lo: 0.05,
            hi: 60.0,
        },
    ]
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn digital_boundaries_at_other_kappas() {
    // (κ, c*, x1*, x2*): the four smooth-fit equations solved with mpmath at 40 digits.
    let table = [
        (0.0, -0.09019310786469473, 0.2160234455291663, -0.6302973410936947),
        (0.02, -0.09793461485957453, 0.1963519588210629, -0.6038118546755789),
        (0.05, -0.1079589262520418, 0.1701967218626737, -0.5703221844304864),
    ];
    for (k, c, x1, x2) in table {
        let s = linear::solve(&AmbiguityParams::linear(k, 0.02, 0.1).unwrap(), &digital()).unwrap();
        assert_eq!(s.regime, Regime::DigitalSmoothFit);
        assert!((s.c_star - c).abs() < 1e-8, "κ={k}: c* {} vs {c}", s.c_star);
        assert!((s.thresholds[1] - x1).abs() < 1e-8, "κ={k}: x1 {}", s.thresholds[1]);
        assert!((s.thresholds[0] - x2).abs() < 1e-8, "κ={k}: x2 {}", s.thresholds[0]);
    }
}

#[test]
fn more_ambiguity_lowers_values_and_shrinks_continuation() {
    for case in cases() {
        let sols: Vec<Solution> = KAPPAS.iter().map(|k| (case.solve)(*k)).collect();
        let ys = grid(case.lo, case.hi, 2001);
        for w in sols.windows(2) {
            let (small, large) = (&w[0], &w[1]);
            for &y in &ys {
                let (vs, vl) = (small.value(y), large.value(y));
                assert!(vl <= vs + 1e-9 * vs.abs().max(1.0), "{}: V rises with κ at y={y}: {vs} → {vl}", case.name);
                if !large.in_stopping_set(y) {
                    assert!(!small.in_stopping_set(y), "{}: continuation not nested at y={y}", case.name);
                }
            }
        }
    }
}

#[test]
fn value_dominates_payoff() {
    for case in cases() {
        for k in KAPPAS {
            let s = (case.solve)(k);
            for y in grid(case.lo, case.hi, 10_000) {
                let (v, f) = (s.value(y), s.payoff().eval(y));
                let tol = 1e-12 * f.abs().max(1.0);
                assert!(v >= f - tol, "{} κ={k}: V({y}) = {v} < F = {f}", case.name);
                if s.in_stopping_set(y) {
                    assert_eq!(v, f, "{} κ={k}: V ≠ F on the stopping set at {y}", case.name);
                }
            }
        }
    }
}

#[test]
fn value_is_continuous_at_boundaries() {
    for case in cases() {
        let s = (case.solve)(0.02);
        for &t in &s.thresholds {
            let e = 1e-9 * t.abs().max(1.0);
            let f = s.payoff().eval(t);
            // Against F(t): the payoff itself may jump at a boundary.
            for y in [t - e, t + e] {
                let gap = s.value(y) - f;
                assert!(gap.abs() < 1e-7 * f.abs().max(1.0), "{} at {t}, y={y}: gap {gap}", case.name);
            }
        }
    }
}

#[test]
fn smooth_fit_where_claimed() {
    for case in cases() {
        let s = (case.solve)(0.02);
        for (i, &t) in s.thresholds.iter().enumerate() {
            if s.regime == Regime::DigitalKinkAtZero && t == 0.0 {
                continue;
            }
            // One-sided slopes of V just inside the continuation set against
            // the payoff slope on the same side.
            let h = 1e-6 * t.abs().max(1.0);
            let inside = if s.in_stopping_set(t + 2.0 * h) { t - h } else { t + h };
            let dv = s.value.continuation_deriv(inside).unwrap();
            let df = (s.payoff().eval(inside + 0.5 * h) - s.payoff().eval(inside - 0.5 * h)) / h;
            assert!((dv - df).abs() < 1e-4 * df.abs().max(1.0), "{} boundary {i} at {t}: {dv} vs {df}", case.name);
        }
    }
}

#[test]
fn excessive_functions_are_convex() {
    let p = AmbiguityParams::linear(0.02, 0.02, 0.1).unwrap();
    let ex = compute_exponents(&p).unwrap();
    for c in [-0.5, 0.0, 0.3] {
        let u = UcLinear::new(ex, c);
        let h = 1e-3;
        for y in grid(c - 2.0, c + 2.0, 4001) {
            let d2 = u.value(y + h) - 2.0 * u.value(y) + u.value(y - h);
            assert!(d2 >= -1e-12 * u.value(y), "linear c={c}, y={y}: {d2}");
        }
    }
    let rp = AmbiguityParams::radial(0.02, 0.1, 5).unwrap();
    let f = RadialFundamentals::new(&rp).unwrap();
    for c in [0.0, 9.0, 40.0, f64::INFINITY] {
        let u = UcRadial::new(f, c).unwrap();
        for y in grid(0.1, 100.0, 2000) {
            let h = 1e-3 * y;
            let d2 = u.value(y + h) - 2.0 * u.value(y) + u.value(y - h);
            assert!(d2 >= -1e-10 * u.value(y), "radial c={c}, y={y}: {d2}");
        }
    }
}

#[test]
fn radial_wronskians_are_constant() {
    for (k, r, d) in [(0.02, 0.1, 5), (0.0, 0.05, 2), (0.3, 0.02, 3)] {
        let f = RadialFundamentals::new(&AmbiguityParams::radial(k, r, d).unwrap()).unwrap();
        for i in [1, 2] {
            let ws: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 50.0, 200.0].iter().map(|y| f.wronskian(i, *y).unwrap()).collect();
            let (lo, hi) = ws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(*w), b.max(*w)));
            assert!((hi - lo) / hi.abs() < 1e-6, "κ={k} d={d} branch {i}: {ws:?}");
            assert!((ws[2] / f.b_const(i) - 1.0).abs() < 1e-6, "closed-form constant on branch {i}");
        }
    }
}

#[test]
fn ode_residuals() {
    let p = AmbiguityParams::linear(0.01, 0.02, 0.1).unwrap();
    let ex = compute_exponents(&p).unwrap();
    for c in [-0.3, 0.0, 0.4] {
        let u = UcLinear::new(ex, c);
        for y in grid(c - 1.5, c + 1.5, 301) {
            if (y - c).abs() < 1e-9 {
                continue;
            }
            assert!(u.ode_residual(&p, y).abs() <= 1e-10, "linear c={c}, y={y}");
        }
    }

    let rp = AmbiguityParams::radial(0.02, 0.1, 5).unwrap();
    let f = RadialFundamentals::new(&rp).unwrap();
    for c in [0.0, 9.0, f64::INFINITY] {
        let u = UcRadial::new(f, c).unwrap();
        for y in [0.3, 1.0, 4.0, 8.5, 9.5, 20.0, 60.0] {
            // Fourth-order difference of the analytic slope.
            let h = 1e-3 * y;
            let d = |x: f64| u.deriv(x);
            let d2 = (8.0 * (d(y + h) - d(y - h)) - (d(y + 2.0 * h) - d(y - 2.0 * h))) / (12.0 * h);
            let sgn = if y >= c { 1.0 } else { -1.0 };
            let drift = 5.0 - 2.0 * sgn * 0.02 * y.sqrt();
            let (v, d1) = (u.value(y), d(y));
            let scale = (2.0 * y * d2).abs() + (drift * d1).abs() + (0.1 * v).abs();
            let res = 2.0 * y * d2 + drift * d1 - 0.1 * v;
            assert!(res.abs() <= 1e-8 * scale, "radial c={c}, y={y}: {res} (scale {scale})");
        }
    }
}
