//! Coverage checking: do the pieces of a decomposition cover the domain?

use super::heuristic::permutations;
use super::{extra_constraints, Decomposition};
use crate::expr::{evaluate, int, Assignment, Expr, Rational};
use crate::latex::{render_constraint, render_expr};
use crate::problem::Problem;
use crate::prover::{prove_piece_with, PieceConfig, PieceOutcome};
use crate::region::{Constraint, Region, Rel};
use crate::sampling::{sample_region, DEFAULT_SEED};
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Sample count for covers without a syntactic argument.
pub const COVER_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoverageReport {
    ProvedCover { reason: String },
    SampledCover { n_samples: usize, n_uncovered: usize },
    /// `witness` lies in the domain but in no piece.
    NotCover { witness: Assignment, reason: String },
}

impl CoverageReport {
    pub fn is_cover(&self) -> bool {
        !matches!(self, CoverageReport::NotCover { .. })
    }
}

/// Checks that a decomposition covers the problem's domain.
///
/// Complementary threshold pairs, ordering permutations and max covers are
/// accepted syntactically; other covers are sampled. Ladders must be
/// provably nondecreasing on the parameter region and start at or above
/// the series start.
pub fn validate_cover(p: &Problem, d: &Decomposition) -> CoverageReport {
    if let Err(e) = d.check(p) {
        return CoverageReport::NotCover {
            witness: Assignment::new(),
            reason: e.to_string(),
        };
    }
    match (p, d) {
        (Problem::Inequality(q), Decomposition::RegionCover { pieces }) => {
            region_cover(&q.region, pieces)
        }
        (Problem::Series(s), Decomposition::Breakpoints { ladder }) => {
            let mut chain = vec![Expr::Const(int(s.start))];
            chain.extend(ladder.iter().cloned());
            ladder_cover(&s.params_region, &chain)
        }
        _ => unreachable!("kind checked above"),
    }
}

fn region_cover(parent: &Region, pieces: &[Region]) -> CoverageReport {
    let extras: Vec<Vec<Constraint>> = pieces
        .iter()
        .map(|r| extra_constraints(parent, r))
        .collect();
    if let Some(reason) = syntactic_cover(&extras) {
        return CoverageReport::ProvedCover { reason };
    }
    let points = sample_region(parent, COVER_SAMPLES, DEFAULT_SEED);
    for a in &points {
        if !pieces.iter().any(|r| r.contains(a)) {
            return CoverageReport::NotCover {
                witness: a.clone(),
                reason: "point of the domain lies in no piece".into(),
            };
        }
    }
    CoverageReport::SampledCover {
        n_samples: points.len(),
        n_uncovered: 0,
    }
}

fn syntactic_cover(extras: &[Vec<Constraint>]) -> Option<String> {
    if extras.iter().any(Vec::is_empty) {
        return Some("a piece is the whole domain".into());
    }
    if let [a, b] = extras {
        if let ([x], [y]) = (a.as_slice(), b.as_slice()) {
            if x.is_complement_of(y) {
                return Some(format!(
                    "complementary pair {} and {}",
                    render_constraint(x),
                    render_constraint(y)
                ));
            }
        }
    }
    let vars = chain_vars(extras)?;
    let n = vars.len();
    let keys = |cs: &[Constraint]| -> BTreeSet<String> { cs.iter().map(Constraint::key).collect() };
    let given: BTreeSet<BTreeSet<String>> = extras.iter().map(|e| keys(e)).collect();
    let le = |a: &str, b: &str| Constraint::new(Expr::var(a), Rel::Le, Expr::var(b));
    let orderings: BTreeSet<BTreeSet<String>> = permutations(&vars)
        .iter()
        .map(|p| keys(&p.windows(2).map(|w| le(&w[0], &w[1])).collect::<Vec<_>>()))
        .collect();
    if orderings.is_subset(&given) {
        return Some(format!("all {} orderings of {}", orderings.len(), vars.join(", ")));
    }
    let maxima: BTreeSet<BTreeSet<String>> = vars
        .iter()
        .map(|v| {
            keys(&vars
                .iter()
                .filter(|w| *w != v)
                .map(|w| le(w, v))
                .collect::<Vec<_>>())
        })
        .collect();
    if n > 1 && maxima.is_subset(&given) {
        return Some(format!("every variable of {} is a maximum somewhere", vars.join(", ")));
    }
    None
}

/// Variables of the pure `a <= b` comparisons, when every extra is one.
fn chain_vars(extras: &[Vec<Constraint>]) -> Option<Vec<String>> {
    let mut vars = BTreeSet::new();
    for c in extras.iter().flatten() {
        match (&c.lhs, c.rel, &c.rhs) {
            (Expr::Var(a), Rel::Le | Rel::Ge, Expr::Var(b)) => {
                vars.insert(a.clone());
                vars.insert(b.clone());
            }
            _ => return None,
        }
    }
    Some(vars.into_iter().collect())
}

fn ladder_cover(params: &Region, chain: &[Expr]) -> CoverageReport {
    let cfg = PieceConfig {
        box_budget: 4096,
        ..PieceConfig::default()
    };
    for w in chain.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let proved = matches!(
            prove_piece_with(a, b, params, &Rational::one(), &cfg),
            Ok(PieceOutcome::Proved(_))
        );
        if proved {
            continue;
        }
        let points = sample_region(params, COVER_SAMPLES, DEFAULT_SEED);
        let bad = points.iter().find(|p| match (evaluate(a, p), evaluate(b, p)) {
            (Ok(x), Ok(y)) => x > y,
            _ => false,
        });
        return match bad {
            Some(w) => CoverageReport::NotCover {
                witness: w.clone(),
                reason: format!("ladder decreases from {} to {}", render_expr(a), render_expr(b)),
            },
            None => CoverageReport::SampledCover {
                n_samples: points.len(),
                n_uncovered: 0,
            },
        };
    }
    CoverageReport::ProvedCover {
        reason: "ladder is nondecreasing and the last segment is unbounded".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latex::{parse_constraints, parse_problem};

    fn cover(p: &Problem, pieces: &[&str]) -> Decomposition {
        let extras: Vec<Vec<Constraint>> = pieces
            .iter()
            .map(|s| parse_constraints(s).unwrap())
            .collect();
        Decomposition::from_extras(p.region(), &extras)
    }

    #[test]
    fn complementary_pair_is_proved() {
        let p = parse_problem(r"x y \ll x \log x + e^y, x \geq 1, y \geq 0").unwrap();
        let d = cover(&p, &[r"y \leq 2 \log x", r"y > 2 \log x"]);
        assert!(matches!(validate_cover(&p, &d), CoverageReport::ProvedCover { .. }));
    }

    #[test]
    fn gapped_cover_has_witness_in_the_gap() {
        let p = parse_problem(r"x y \ll x \log x + e^y, x \geq 1, y \geq 0").unwrap();
        let d = cover(&p, &[r"y \leq \log x", r"y > 2 \log x"]);
        let CoverageReport::NotCover { witness, .. } = validate_cover(&p, &d) else {
            panic!("gap not found");
        };
        let (x, y) = (witness["x"], witness["y"]);
        assert!(x >= 1.0 && y > x.ln() && y <= 2.0 * x.ln());
    }

    #[test]
    fn ordering_and_max_covers_are_proved() {
        let p = parse_problem(r"x y z \ll x^3 + y^3 + z^3, x \geq 0, y \geq 0, z \geq 0").unwrap();
        for d in crate::decompose::heuristic_propose(&p).unwrap() {
            assert!(matches!(validate_cover(&p, &d), CoverageReport::ProvedCover { .. }));
        }
    }

    #[test]
    fn ladder_is_checked_for_order() {
        let p = parse_problem(r"\sum_{d=0}^{\infty} \frac{1}{d^2 + h^2} \ll \frac{1}{h}, h \geq 1, m \geq 2").unwrap();
        let ok = Decomposition::Breakpoints {
            ladder: vec![Expr::var("h"), crate::expr::normalize(&(Expr::var("h") * Expr::var("m")))],
        };
        assert!(matches!(validate_cover(&p, &ok), CoverageReport::ProvedCover { .. }));
        let bad = Decomposition::Breakpoints {
            ladder: vec![crate::expr::normalize(&(Expr::var("h") * Expr::var("m"))), Expr::var("h")],
        };
        assert!(matches!(validate_cover(&p, &bad), CoverageReport::NotCover { .. }));
    }

    #[test]
    fn overlapping_sampled_cover() {
        let p = parse_problem(r"x \ll x^2, x \geq 1").unwrap();
        let d = cover(&p, &[r"x \leq 10", r"x \geq 5"]);
        assert!(matches!(
            validate_cover(&p, &d),
            CoverageReport::SampledCover { n_samples: COVER_SAMPLES, n_uncovered: 0 }
        ));
    }
}
