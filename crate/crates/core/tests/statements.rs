//! The two worked statements, parsed from their source LaTeX.

use decomp_core::expr::{evaluate, Assignment};
use decomp_core::latex::{parse_problem, parse_problem_with, DiagnosticKind, ParseOptions};
use decomp_core::problem::Problem;

const SERIES_SRC: &str = r"S(h,m) \;:=\; \sum_{d=0}^{\infty} \frac{2d+1}{2h^2\left(1+\frac{d(d+1)}{h^2}\right)\left(1+\frac{d(d+1)}{h^2 m^2}\right)^2}
\;\;\ll\;\; 1+\log(m^2).";

/// Hand-written summand.
fn oracle(d: f64, h: f64, m: f64) -> f64 {
    let a = 1.0 + d * (d + 1.0) / (h * h);
    let b = 1.0 + d * (d + 1.0) / (h * h * m * m);
    (2.0 * d + 1.0) / (2.0 * h * h * a * b * b)
}

#[test]
fn series_without_conditions_is_ambiguous() {
    let err = parse_problem(SERIES_SRC).unwrap_err();
    assert!(err.has_kind(DiagnosticKind::AmbiguousDomain));
    let named: Vec<&str> = err.diagnostics.iter().map(|d| d.message.as_str()).collect();
    assert!(named.iter().any(|m| m.contains("'h'")) && named.iter().any(|m| m.contains("'m'")));
}

#[test]
fn series_summand_matches_oracle() {
    let src = format!("{}, h \\geq 1, m \\geq 1", SERIES_SRC.trim_end_matches('.'));
    let Problem::Series(s) = parse_problem(&src).unwrap() else {
        panic!("expected a series")
    };
    assert_eq!((s.index.as_str(), s.start), ("d", 0));
    assert_eq!(s.params(), vec!["h", "m"]);
    for d in [0.0, 1.0, 2.0, 7.0, 30.0, 1000.0] {
        for h in [1.0, 1.5, 5.0, 25.0] {
            for m in [1.0, 3.0, 25.0] {
                let p = Assignment::from([("d".into(), d), ("h".into(), h), ("m".into(), m)]);
                let got = evaluate(&s.summand, &p).unwrap();
                let want = oracle(d, h, m);
                assert!((got - want).abs() <= 1e-12 * want, "({d}, {h}, {m}): {got} vs {want}");
            }
        }
        let target = evaluate(&s.target, &Assignment::from([("h".into(), 2.0), ("m".into(), 3.0)])).unwrap();
        assert!((target - (1.0 + 9f64.ln())).abs() < 1e-12);
    }
}

#[test]
fn unconstrained_reading_is_opt_in() {
    let opts = ParseOptions {
        allow_unconstrained: true,
    };
    let p = parse_problem_with(SERIES_SRC, &opts).unwrap();
    assert!(p.region().constraints.is_empty());
}

#[test]
fn inequality_statement() {
    let Problem::Inequality(q) = parse_problem(r"x y \ll x\log x + e^y, x \geq 1, y \geq 0").unwrap() else {
        panic!("expected an inequality")
    };
    let p = Assignment::from([("x".into(), 3.0), ("y".into(), 0.5)]);
    assert!((evaluate(&q.lhs, &p).unwrap() - 1.5).abs() < 1e-12);
    let rhs = 3.0 * 3f64.ln() + 0.5f64.exp();
    assert!((evaluate(&q.rhs, &p).unwrap() - rhs).abs() < 1e-12);
    assert_eq!(q.region.constraints.len(), 2);
}
