//! Randomized invariants. Oracles are plain `f64` evaluation of raw,
//! unnormalized trees.

use decomp_core::expr::{
    differentiate, evaluate, int, monotonicity_on, normalize, rat, Assignment, Expr, Monotonicity, Rational,
};
use decomp_core::interval::{eval_expr, BoxBounds, Interval};
use decomp_core::latex::{parse_expr, render_expr};
use decomp_core::region::{lower, Constraint, Region, Rel};
use decomp_core::simplify::{dominate_bound, replay, ReplayResult};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

const VARS: [&str; 2] = ["x", "y"];
/// Sample box; every generated expression is defined on it.
const LO: f64 = 1.0;
const HI: f64 = 4.0;

fn exponent() -> impl Strategy<Value = Rational> {
    prop::sample::select(vec![rat(-2, 1), rat(-1, 1), rat(-1, 2), rat(1, 2), rat(1, 1), rat(2, 1), rat(3, 1)])
}

fn coefficient() -> impl Strategy<Value = Rational> {
    (1i64..=6, 1i64..=3).prop_map(|(n, d)| rat(n, d))
}

/// Raw trees that are positive on `[LO, HI]^2`.
fn positive_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        coefficient().prop_map(Expr::Const),
        prop::sample::select(VARS.to_vec()).prop_map(Expr::var),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Product),
            (inner.clone(), exponent()).prop_map(|(b, q)| Expr::Power(Box::new(b), q)),
            inner
                .clone()
                .prop_map(|a| Expr::Log(Box::new(Expr::Sum(vec![Expr::one(), a])))),
            (inner, coefficient()).prop_map(|(a, c)| {
                // exp(c a / (1 + a)) keeps the argument below 6.
                let bounded = Expr::Product(vec![
                    Expr::Const(c),
                    a.clone(),
                    Expr::Power(Box::new(Expr::Sum(vec![Expr::one(), a])), int(-1)),
                ]);
                Expr::Exp(Box::new(bounded))
            }),
        ]
    })
}

/// Differences of positive trees, so signs vary.
pub fn signed_expr() -> impl Strategy<Value = Expr> {
    (positive_expr(), positive_expr(), coefficient())
        .prop_map(|(a, b, c)| Expr::Sum(vec![a, Expr::Product(vec![Expr::Const(-c), b])]))
}

fn point() -> impl Strategy<Value = Assignment> {
    (LO..HI, LO..HI).prop_map(|(x, y)| Assignment::from([("x".to_string(), x), ("y".to_string(), y)]))
}

fn sample_box() -> BoxBounds {
    VARS.iter().map(|v| (v.to_string(), Interval::new(LO, HI))).collect()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn normalize_idempotent(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&signed_expr(), |e| {
            let n = normalize(&e);
            let again = normalize(&n);
            check(again == n, || format!("{n} renormalizes to {again}"))
        })
        .map_err(|e| e.to_string())
}

pub fn normalize_preserves_values(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(signed_expr(), point()), |(e, p)| {
            let raw = evaluate(&e, &p).unwrap();
            let n = evaluate(&normalize(&e), &p).unwrap();
            check((raw - n).abs() <= 1e-9 * raw.abs().max(n.abs()).max(1.0), || {
                format!("{raw} vs {n} for {e}")
            })
        })
        .map_err(|e| e.to_string())
}

/// Relative error against a five-point central difference is at most 1e-6.
pub fn derivative_matches_finite_differences(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(signed_expr(), point()), |(e, p)| {
            let exact = evaluate(&differentiate(&normalize(&e), "x"), &p).unwrap();
            let x = p["x"];
            let h = 1e-3;
            let f = |t: f64| {
                let mut q = p.clone();
                q.insert("x".into(), t);
                evaluate(&e, &q).unwrap()
            };
            let fd = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
            // Relative to the function's own scale, where cancellation lives.
            let scale = exact.abs().max(f(x).abs()).max(1e-300);
            check((fd - exact).abs() <= 1e-6 * scale, || format!("{fd} vs {exact} for {e}"))
        })
        .map_err(|e| e.to_string())
}

pub fn interval_encloses_samples(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(signed_expr(), point()), |(e, p)| {
            let iv = eval_expr(&normalize(&e), &sample_box()).unwrap();
            let v = evaluate(&e, &p).unwrap();
            let slack = 1e-12 * v.abs();
            check(iv.lo <= v + slack && v - slack <= iv.hi, || {
                format!("{v} not in [{}, {}] for {e}", iv.lo, iv.hi)
            })
        })
        .map_err(|e| e.to_string())
}

pub fn latex_round_trip(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&signed_expr(), |e| {
            let n = normalize(&e);
            let text = render_expr(&n);
            let back = parse_expr(&text).map_err(|d| TestCaseError::fail(format!("{text}: {d}")))?;
            check(back == n, || format!("{n} renders as {text} and parses to {back}"))
        })
        .map_err(|e| e.to_string())
}

/// A claimed monotone direction holds between sampled pairs on the box.
pub fn monotonicity_sound(cases: u32) -> Result<(), String> {
    let strat = (
        signed_expr(),
        LO..HI,
        LO..HI,
        LO..HI,
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 8),
    );
    runner(cases)
        .run(&strat, |(e, a, b, y, pairs)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut bx = sample_box();
            bx.insert("x".into(), Interval::new(lo, hi));
            let m = monotonicity_on(&normalize(&e), "x", &bx);
            if m == Monotonicity::Unknown {
                return Ok(());
            }
            let at = |x: f64| evaluate(&e, &Assignment::from([("x".to_string(), x), ("y".to_string(), y)])).unwrap();
            for (s, t) in pairs {
                let (s, t) = if s < t { (s, t) } else { (t, s) };
                let (u, v) = (at(lo + (hi - lo) * s), at(lo + (hi - lo) * t));
                let tol = 1e-9 * u.abs().max(v.abs()).max(1.0);
                let ok = match m {
                    Monotonicity::Increasing => u <= v + tol,
                    _ => u + tol >= v,
                };
                check(ok, || format!("{m:?} violated by {u}, {v} for {e}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every summand `d^a h^b / (1 + d^c / h^k)` of a small family on the
/// segments `[1, h]` and `[h, oo)`: each bound found must replay.
pub fn regime_bounds_replay() -> Result<(), String> {
    let (d, h) = (Expr::var("d"), Expr::var("h"));
    let (mut found, mut total) = (0, 0);
    for a in -2..=1 {
        for b in -2..=2 {
            for c in 1..=3 {
                for k in 1..=2 {
                    let den = Expr::one() + d.clone().powi(c) * h.clone().powi(-k);
                    let summand = d.clone().powi(a) * h.clone().powi(b) / den;
                    for rel in [Rel::Le, Rel::Ge] {
                        let cs = vec![lower("h", 1), lower("d", 1), Constraint::new(d.clone(), rel, h.clone())];
                        let r = Region::reals(&["d", "h"], cs);
                        total += 1;
                        if let Ok(bd) = dominate_bound(&summand, &r) {
                            found += 1;
                            if replay(&bd) != ReplayResult::Valid {
                                return Err(format!("{summand} <= {} * {} does not replay", bd.factor, bd.bound));
                            }
                        }
                    }
                }
            }
        }
    }
    // The family is mostly tractable; a collapse means the simplifier regressed.
    if found * 2 < total {
        return Err(format!("only {found} of {total} summands simplified"));
    }
    Ok(())
}
