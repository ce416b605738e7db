use super::dominate::RegimeBound;
use super::steps::{JustificationStep, Rule, StepRelation};
use crate::expr::{
    evaluate, int, monotonicity_on, normalize, rational_to_f64, substitute, Expr, Monotonicity,
    Rational,
};
use crate::interval::{eval_expr, Interval};
use crate::prover::{prove_nonneg, prove_piece_with, BnbConfig, BnbOutcome, PieceConfig, PieceOutcome};
use crate::region::{Region, Rel};
use crate::sampling::sample_region;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayResult {
    Valid,
    /// Index of the first step that does not check; `steps.len()` when the
    /// steps check but the overall claim fails a spot check.
    Invalid(usize),
}

const BUDGET: usize = 4096;
const SPOT_CHECKS: usize = 64;

/// Re-verifies a bound step by step.
pub fn replay(b: &RegimeBound) -> ReplayResult {
    let points = sample_region(&b.region, SPOT_CHECKS, crate::sampling::DEFAULT_SEED);
    for (i, s) in b.steps.iter().enumerate() {
        if !step_holds(s, &b.region) || !spot_check(s, &points) {
            return ReplayResult::Invalid(i);
        }
    }
    let k = rational_to_f64(&b.factor);
    for p in &points {
        let (Ok(src), Ok(bd)) = (evaluate(&b.source, p), evaluate(&b.bound, p)) else {
            continue;
        };
        if !le_tol(src, k * bd) {
            return ReplayResult::Invalid(b.steps.len());
        }
    }
    ReplayResult::Valid
}

fn le_tol(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(a.abs()) + 1e-300
}

fn spot_check(s: &JustificationStep, points: &[crate::expr::Assignment]) -> bool {
    points.iter().all(|p| {
        let (Ok(x), Ok(y)) = (evaluate(&s.before, p), evaluate(&s.after, p)) else {
            return true;
        };
        match &s.relation {
            StepRelation::AtMost { factor } => le_tol(x, rational_to_f64(factor) * y),
            StepRelation::AtLeast => le_tol(y, x),
        }
    })
}

fn nonneg_on(e: &Expr, r: &Region) -> bool {
    let cfg = BnbConfig {
        budget: BUDGET,
        deriv_depth: 2,
    };
    matches!(prove_nonneg(e, r, &cfg), BnbOutcome::Proved { .. })
}

fn proves(f: &Expr, g: &Expr, r: &Region) -> bool {
    let cfg = PieceConfig {
        box_budget: BUDGET,
        ..PieceConfig::default()
    };
    matches!(
        prove_piece_with(f, g, r, &Rational::one(), &cfg),
        Ok(PieceOutcome::Proved(_))
    )
}

fn step_holds(s: &JustificationStep, r: &Region) -> bool {
    match (s.rule, &s.relation) {
        (Rule::ConstantAbsorb, StepRelation::AtMost { factor }) => {
            normalize(&s.before) == normalize(&s.after.clone().scale(factor.clone()))
        }
        (Rule::NumeratorTermCount, StepRelation::AtMost { factor }) => {
            let Expr::Sum(ts) = &s.before else {
                return false;
            };
            if !ts.contains(&s.after) {
                return false;
            }
            let mut total = Rational::one();
            for t in ts.iter().filter(|t| **t != s.after) {
                let Some(p) = s.premises.iter().find(|p| p.lhs == *t && p.rel == Rel::Le) else {
                    return false;
                };
                let ratio = normalize(&(p.rhs.clone() / s.after.clone()));
                let Some(c) = ratio.as_const() else {
                    return false;
                };
                if c.is_negative() || !proves(t, &p.rhs, r) {
                    return false;
                }
                total += c;
            }
            total <= *factor && nonneg_on(&s.after, r)
        }
        (Rule::DenominatorLeadingTerm | Rule::PositivityDrop, StepRelation::AtLeast) => {
            let Expr::Sum(ts) = &s.before else {
                return false;
            };
            let kept = s.after.terms();
            if !kept.iter().all(|k| ts.contains(k)) {
                return false;
            }
            ts.iter()
                .filter(|t| !kept.contains(t))
                .all(|t| nonneg_on(t, r))
        }
        (Rule::MonotoneSubstitution, rel) => {
            let Some(p) = s.premises.first() else {
                return false;
            };
            let Expr::Var(v) = &p.lhs else {
                return false;
            };
            if normalize(&substitute(&s.before, v, &p.rhs)) != normalize(&s.after) {
                return false;
            }
            let premise_holds = match p.rel {
                Rel::Le | Rel::Lt => nonneg_on(&(p.rhs.clone() - p.lhs.clone()), r),
                Rel::Ge | Rel::Gt => nonneg_on(&(p.lhs.clone() - p.rhs.clone()), r),
                Rel::Eq => false,
            };
            if !premise_holds {
                return false;
            }
            let hull = r.bounds();
            let mut ext = hull.clone();
            let cur = ext.get(v).copied().unwrap_or(Interval::ENTIRE);
            let Ok(bi) = eval_expr(&p.rhs, &hull) else {
                return false;
            };
            ext.insert(v.clone(), cur.hull(&bi));
            let m = monotonicity_on(&s.before, v, &ext);
            let up = p.rel.is_upper();
            match rel {
                StepRelation::AtMost { factor } => {
                    *factor >= int(1)
                        && matches!(
                            (m, up),
                            (Monotonicity::Increasing, true) | (Monotonicity::Decreasing, false)
                        )
                }
                StepRelation::AtLeast => matches!(
                    (m, up),
                    (Monotonicity::Increasing, false) | (Monotonicity::Decreasing, true)
                ),
            }
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::lower;
    use crate::simplify::dominate_bound;

    fn e(s: &str) -> Expr {
        normalize(&s.parse().unwrap())
    }

    #[test]
    fn rejects_misused_positivity_drop() {
        let r = Region::reals(&["x"], vec![lower("x", 1)]);
        let b = RegimeBound {
            source: e("(+ x 1)"),
            region: r,
            bound: e("x"),
            factor: int(1),
            steps: vec![JustificationStep {
                rule: Rule::PositivityDrop,
                premises: Vec::new(),
                before: e("(+ x 1)"),
                after: e("x"),
                relation: StepRelation::AtMost { factor: int(1) },
            }],
        };
        assert_eq!(replay(&b), ReplayResult::Invalid(0));
    }

    #[test]
    fn accepts_generated_bound() {
        let r = Region::reals(&["n"], vec![lower("n", 1)]);
        let b = dominate_bound(&e("(^ (+ (^ n 2) n) -1)"), &r).unwrap();
        assert_eq!(b.bound, e("(^ n -2)"));
        assert_eq!(replay(&b), ReplayResult::Valid);
    }

    #[test]
    fn rejects_inflated_claim() {
        let r = Region::reals(&["n"], vec![lower("n", 1)]);
        let mut b = dominate_bound(&e("(* 3 (^ (+ (^ n 2) n) -1))"), &r).unwrap();
        b.factor = int(1);
        assert_eq!(replay(&b), ReplayResult::Invalid(b.steps.len()));
    }
}
