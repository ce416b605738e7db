//! Series certification over a ladder of index thresholds.
//!
//! Each segment `[a, b)` of the ladder gets a regime bound `K P d^k` (or a
//! geometric `K P e^{L d}`), whose sum over the integers of the segment is
//! bounded in closed form by comparison with an integral. The closed form is
//! then compared with the target by grid search over the parameters. When no
//! term dominates on a segment that starts at an integer, that first term is
//! peeled off and bounded on its own.

use super::grid::{grid_search_with, GridOutcome};
use super::piece::PieceConfig;
use super::{GridSpec, ProverError};
use crate::expr::{expand, int, normalize, simplify_positive, substitute, Expr, Rational};
use crate::interval::{is_nonneg, is_pos, BoxBounds};
use crate::problem::SeriesProblem;
use crate::region::{Constraint, Rel};
use crate::simplify::{dominate_bound, RegimeBound, SimplifyError};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SeriesError {
    #[error("the segment sum of {bound} diverges")]
    Divergent { bound: Expr },
    #[error("unsupported regime bound {0}")]
    UnsupportedBound(String),
    #[error("segment lower endpoint {0} is not certified positive")]
    NonPositiveStart(Expr),
    #[error(transparent)]
    Simplify(#[from] SimplifyError),
    #[error(transparent)]
    Prover(#[from] ProverError),
}

/// Closed-form upper bound of `sum_{a <= d < b} K P d^k` over integers `d`.
///
/// For `k >= 0` the summand is nondecreasing and the sum is at most
/// `int_a^{b+1}`; for `k < 0` it is at most `f(a) + int_a^b`. A geometric
/// bound `K P e^{L d}` with `L < 0` sums to at most `K P e^{L a} / (1 - e^L)`.
pub fn bound_segment_sum(
    rb: &RegimeBound,
    index: &str,
    a: &Expr,
    b: Option<&Expr>,
) -> Result<Expr, SeriesError> {
    let hull = rb.region.bounds();
    let mut k = Rational::zero();
    let mut rate: Option<Expr> = None;
    let mut rest = Vec::new();
    for f in rb.bound.factors() {
        if !f.contains_var(index) {
            rest.push(f);
            continue;
        }
        match &f {
            Expr::Var(_) => k += Rational::one(),
            Expr::Power(base, q) if matches!(base.as_ref(), Expr::Var(v) if v == index) => {
                k += q
            }
            Expr::Exp(arg) => {
                let l = normalize(&(arg.as_ref().clone() / Expr::var(index)));
                if l.contains_var(index) {
                    return Err(SeriesError::UnsupportedBound(rb.bound.to_string()));
                }
                rate = Some(match rate {
                    Some(r) => r + l,
                    None => l,
                });
            }
            _ => return Err(SeriesError::UnsupportedBound(rb.bound.to_string())),
        }
    }
    let coeff = Expr::product(rest).scale(rb.factor.clone());
    let divergent = || SeriesError::Divergent {
        bound: rb.bound.clone(),
    };
    let sum = if let Some(l) = rate {
        if !k.is_zero() {
            return Err(SeriesError::UnsupportedBound(rb.bound.to_string()));
        }
        if !is_pos(&-l.clone(), &hull) {
            return Err(divergent());
        }
        let first = (l.clone() * a.clone()).exp();
        let ratio = (Expr::one() - l.exp()).powi(-1);
        coeff * first * ratio
    } else if !k.is_negative() {
        let b = b.ok_or_else(divergent)?;
        if !is_nonneg(a, &hull) {
            return Err(SeriesError::NonPositiveStart(a.clone()));
        }
        let k1 = k.clone() + Rational::one();
        let top = (b.clone() + Expr::one()).pow(k1.clone());
        let bottom = a.clone().pow(k1.clone());
        coeff * (top - bottom).scale(k1.recip())
    } else {
        if !is_pos(a, &hull) {
            return Err(SeriesError::NonPositiveStart(a.clone()));
        }
        let first = a.clone().pow(k.clone());
        let tail = if k == -Rational::one() {
            let b = b.ok_or_else(divergent)?;
            b.clone().ln() - a.clone().ln()
        } else {
            let k1 = k.clone() + Rational::one();
            match b {
                Some(b) => (b.clone().pow(k1.clone()) - a.clone().pow(k1.clone())).scale(k1.recip()),
                None if k1.is_negative() => a.clone().pow(k1.clone()).scale(-k1.recip()),
                None => return Err(divergent()),
            }
        };
        coeff * (first + tail)
    };
    Ok(tidy(&sum, &hull))
}

fn tidy(e: &Expr, hull: &BoxBounds) -> Expr {
    expand(&simplify_positive(&normalize(e), hull))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentProof {
    pub lower: Expr,
    /// `None` for the unbounded last segment.
    pub upper: Option<Expr>,
    /// Set when this entry is a single peeled term `d = lower`.
    pub peeled: bool,
    pub bound: Option<RegimeBound>,
    /// Closed-form upper bound of the segment's contribution.
    pub segment_sum: Option<Expr>,
    pub outcome: GridOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesProof {
    pub segments: Vec<SegmentProof>,
    /// Sum of the segment constants when every segment is certified.
    #[serde(with = "crate::expr::opt_rational_str")]
    pub total: Option<Rational>,
}

fn unknown(reason: impl Into<String>) -> GridOutcome {
    GridOutcome::Unknown {
        reason: reason.into(),
    }
}

/// Certifies `sum_{d >= start} summand <= C target` segment by segment.
pub fn prove_series(p: &SeriesProblem, ladder: &[Expr], grid: &GridSpec) -> SeriesProof {
    prove_series_with(p, ladder, grid, &PieceConfig::default())
}

pub fn prove_series_with(
    p: &SeriesProblem,
    ladder: &[Expr],
    grid: &GridSpec,
    cfg: &PieceConfig,
) -> SeriesProof {
    let d = Expr::var(&p.index);
    let base = p.summand_region();
    let params_hull = p.params_region.bounds();
    let mut ends: Vec<Expr> = vec![Expr::Const(int(p.start))];
    ends.extend(ladder.iter().cloned());
    let mut segments = Vec::new();
    for (i, lo) in ends.iter().enumerate() {
        let hi = ends.get(i + 1).cloned();
        let mut lo = lo.clone();
        let mut attempt = 0;
        loop {
            let mut cons = vec![Constraint::new(d.clone(), Rel::Ge, lo.clone())];
            if let Some(h) = &hi {
                cons.push(Constraint::new(d.clone(), Rel::Le, h.clone()));
            }
            let region = base.with(&cons);
            match dominate_bound(&p.summand, &region) {
                Ok(rb) => {
                    let (sum, outcome) = match bound_segment_sum(&rb, &p.index, &lo, hi.as_ref()) {
                        Ok(s) => {
                            let out = grid_search_with(&s, &p.target, &p.params_region, grid, cfg)
                                .unwrap_or_else(|e| unknown(e.to_string()));
                            (Some(s), out)
                        }
                        Err(e) => (None, unknown(e.to_string())),
                    };
                    segments.push(SegmentProof {
                        lower: lo.clone(),
                        upper: hi.clone(),
                        peeled: false,
                        bound: Some(rb),
                        segment_sum: sum,
                        outcome,
                    });
                    break;
                }
                Err(err) => {
                    let peelable = lo.as_const().is_some_and(|c| c.is_integer());
                    if attempt > 0 || !peelable {
                        segments.push(SegmentProof {
                            lower: lo.clone(),
                            upper: hi.clone(),
                            peeled: false,
                            bound: None,
                            segment_sum: None,
                            outcome: unknown(err.to_string()),
                        });
                        break;
                    }
                    let term = tidy(&substitute(&p.summand, &p.index, &lo), &params_hull);
                    let outcome = grid_search_with(&term, &p.target, &p.params_region, grid, cfg)
                        .unwrap_or_else(|e| unknown(e.to_string()));
                    segments.push(SegmentProof {
                        lower: lo.clone(),
                        upper: Some(lo.clone()),
                        peeled: true,
                        bound: None,
                        segment_sum: Some(term),
                        outcome,
                    });
                    lo = normalize(&(lo + Expr::one()));
                    attempt += 1;
                }
            }
        }
    }
    let total = segments
        .iter()
        .map(|s| s.outcome.constant().cloned())
        .sum::<Option<Rational>>();
    SeriesProof { segments, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{lower, Region};

    fn e(s: &str) -> Expr {
        normalize(&s.parse().unwrap())
    }

    fn rb(bound: &str, factor: i64, region: Region) -> RegimeBound {
        RegimeBound {
            source: e(bound),
            region,
            bound: e(bound),
            factor: int(factor),
            steps: Vec::new(),
        }
    }

    #[test]
    fn decreasing_tail_sum() {
        let r = Region::reals(&["n"], vec![lower("n", 1)]);
        let s = bound_segment_sum(&rb("(^ n -2)", 1, r), "n", &Expr::one(), None).unwrap();
        assert_eq!(s, Expr::constant(2));
    }

    #[test]
    fn harmonic_tail_diverges() {
        let r = Region::reals(&["n"], vec![lower("n", 1)]);
        let err = bound_segment_sum(&rb("(^ n -1)", 1, r), "n", &Expr::one(), None).unwrap_err();
        assert!(matches!(err, SeriesError::Divergent { .. }));
    }

    #[test]
    fn increasing_segment_sum() {
        let r = Region::reals(&["d", "h"], vec![lower("d", 1), lower("h", 1)]);
        let s = bound_segment_sum(&rb("(* d (^ h -2))", 2, r), "d", &Expr::one(), Some(&Expr::var("h")))
            .unwrap();
        // ((h+1)^2 - 1) / h^2 = 1 + 2/h
        assert_eq!(s, e("(+ 1 (* 2 (^ h -1)))"));
    }

    #[test]
    fn geometric_segment_sum() {
        let r = Region::reals(&["n"], vec![lower("n", 1)]);
        let b = rb("(exp (* n (log 1/2)))", 1, r);
        let s = bound_segment_sum(&b, "n", &Expr::one(), None).unwrap();
        assert_eq!(s, Expr::one());
    }
}
