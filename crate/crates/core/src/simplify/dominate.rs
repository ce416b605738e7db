use super::steps::{JustificationStep, Rule, StepRelation};
use crate::expr::{int, normalize, rational_from_f64, rational_to_f64, Expr, Rational};
use crate::interval::{is_nonneg, BoxBounds};
use crate::prover::{prove_nonneg, BnbConfig, BnbOutcome, GridSearch, GridSpec, PieceConfig};
use crate::region::{Constraint, Region, Rel};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// `source <= factor * bound` on `region`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeBound {
    pub source: Expr,
    pub region: Region,
    pub bound: Expr,
    #[serde(with = "crate::expr::rational_str")]
    pub factor: Rational,
    pub steps: Vec<JustificationStep>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimplifyError {
    #[error("no term of {sum} dominates the others on the region")]
    NoDominantTerm { sum: Expr },
    #[error("cannot certify that {expr} is nonnegative on the region")]
    PositivityUnderivable { expr: Expr },
}

/// Dominance constants are searched on this grid.
const DOMINANCE_GRID: [i64; 4] = [1, 2, 4, 8];
const CHECK_BUDGET: usize = 4096;

/// Bounds `e` by a single product of powers times a constant on `r`.
///
/// Every sum is replaced by its dominant term: in a numerator the sum is at
/// most the sum of the dominance constants times that term, in a denominator
/// it is at least that term. Ties between admissible terms go to the smaller
/// constant, then to the smaller expression.
pub fn dominate_bound(e: &Expr, r: &Region) -> Result<RegimeBound, SimplifyError> {
    let source = normalize(e);
    let mut b = Builder::new(r);
    let (k, bound) = b.upper(&source)?;
    let (c, rest) = bound.split_coefficient();
    let mut factor = k;
    if !c.is_one() {
        b.steps.push(JustificationStep {
            rule: Rule::ConstantAbsorb,
            premises: Vec::new(),
            before: bound.clone(),
            after: rest.clone(),
            relation: StepRelation::AtMost { factor: c.clone() },
        });
        factor *= c;
    }
    Ok(RegimeBound {
        source,
        region: r.clone(),
        bound: rest,
        factor,
        steps: b.steps,
    })
}

struct Builder<'a> {
    region: &'a Region,
    hull: BoxBounds,
    cache: HashMap<(String, String), Option<Rational>>,
    steps: Vec<JustificationStep>,
}

/// Whether `e` has a sum outside `log`/`exp` arguments.
fn has_sum(e: &Expr) -> bool {
    match e {
        Expr::Sum(_) => true,
        Expr::Product(fs) => fs.iter().any(has_sum),
        Expr::Power(b, _) => has_sum(b),
        _ => false,
    }
}

impl<'a> Builder<'a> {
    fn new(region: &'a Region) -> Self {
        Builder {
            region,
            hull: region.bounds(),
            cache: HashMap::new(),
            steps: Vec::new(),
        }
    }

    fn nonneg(&self, e: &Expr) -> bool {
        if is_nonneg(e, &self.hull) {
            return true;
        }
        let cfg = BnbConfig {
            budget: CHECK_BUDGET,
            deriv_depth: 2,
        };
        matches!(prove_nonneg(e, self.region, &cfg), BnbOutcome::Proved { .. })
    }

    fn require_nonneg(&self, e: &Expr) -> Result<(), SimplifyError> {
        if self.nonneg(e) {
            Ok(())
        } else {
            Err(SimplifyError::PositivityUnderivable { expr: e.clone() })
        }
    }

    /// Smallest grid constant `C` with `a <= C b` on the region.
    fn dominance(&mut self, a: &Expr, b: &Expr) -> Option<Rational> {
        let key = (a.to_string(), b.to_string());
        if let Some(c) = self.cache.get(&key) {
            return c.clone();
        }
        let grid = GridSpec::new(DOMINANCE_GRID.iter().map(|&c| int(c)).collect())
            .expect("static grid");
        let cfg = PieceConfig {
            box_budget: CHECK_BUDGET,
            ..PieceConfig::default()
        };
        let c = GridSearch::new(a, b, self.region, &cfg)
            .ok()
            .and_then(|mut s| s.run(&grid, CHECK_BUDGET).constant().cloned());
        self.cache.insert(key, c.clone());
        c
    }

    /// Index of the dominant term and the constants `C_i` with
    /// `t_i <= C_i t_j` (`C_j = 1`).
    fn dominant(&mut self, sum: &Expr, ts: &[Expr]) -> Result<(usize, Vec<Rational>), SimplifyError> {
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by_key(|&j| ts[j].node_count());
        let mut best: Option<(Rational, usize, Vec<Rational>)> = None;
        for j in order {
            let mut cs = Vec::with_capacity(ts.len());
            let mut ok = true;
            for (i, t) in ts.iter().enumerate() {
                if i == j {
                    cs.push(Rational::one());
                    continue;
                }
                match self.dominance(t, &ts[j]) {
                    Some(c) => cs.push(c),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let total: Rational = cs.iter().cloned().sum();
            if best.as_ref().map_or(true, |(t, _, _)| total < *t) {
                best = Some((total, j, cs));
            }
        }
        best.map(|(_, j, cs)| (j, cs))
            .ok_or_else(|| SimplifyError::NoDominantTerm { sum: sum.clone() })
    }

    /// `(k, b)` with `0 <= e <= k b`.
    fn upper(&mut self, e: &Expr) -> Result<(Rational, Expr), SimplifyError> {
        if !has_sum(e) {
            let (c, rest) = e.split_coefficient();
            return Ok((c, rest));
        }
        match e {
            Expr::Sum(ts) => {
                for t in ts {
                    self.require_nonneg(t)?;
                }
                let (j, cs) = self.dominant(e, ts)?;
                let total: Rational = cs.iter().cloned().sum();
                let premises = ts
                    .iter()
                    .zip(&cs)
                    .enumerate()
                    .filter(|(i, _)| *i != j)
                    .map(|(_, (t, c))| {
                        Constraint::new(t.clone(), Rel::Le, ts[j].clone().scale(c.clone()))
                    })
                    .collect();
                self.steps.push(JustificationStep {
                    rule: Rule::NumeratorTermCount,
                    premises,
                    before: e.clone(),
                    after: ts[j].clone(),
                    relation: StepRelation::AtMost {
                        factor: total.clone(),
                    },
                });
                let (k, b) = self.upper(&ts[j])?;
                Ok((total * k, b))
            }
            Expr::Product(fs) => {
                let mut k = Rational::one();
                let mut bs = Vec::new();
                for f in fs {
                    if let Expr::Const(c) = f {
                        k *= c;
                        continue;
                    }
                    self.require_nonneg(f)?;
                    let (kf, bf) = self.upper(f)?;
                    k *= kf;
                    bs.push(bf);
                }
                Ok((k, normalize(&Expr::Product(bs))))
            }
            Expr::Power(base, q) => {
                self.require_nonneg(base)?;
                if q.is_positive() {
                    let (k, b) = self.upper(base)?;
                    Ok((pow_bound(&k, q, true), b.pow(q.clone())))
                } else {
                    let (k, b) = self.lower(base, true)?;
                    if !k.is_positive() {
                        return Err(SimplifyError::PositivityUnderivable { expr: (**base).clone() });
                    }
                    Ok((pow_bound(&k, q, true), b.pow(q.clone())))
                }
            }
            other => Ok((Rational::one(), other.clone())),
        }
    }

    /// `(k, b)` with `e >= k b >= 0`.
    fn lower(&mut self, e: &Expr, denominator: bool) -> Result<(Rational, Expr), SimplifyError> {
        if !has_sum(e) {
            let (c, rest) = e.split_coefficient();
            return Ok((c, rest));
        }
        match e {
            Expr::Sum(ts) => {
                for t in ts {
                    self.require_nonneg(t)?;
                }
                let (j, _) = self.dominant(e, ts)?;
                self.steps.push(JustificationStep {
                    rule: if denominator {
                        Rule::DenominatorLeadingTerm
                    } else {
                        Rule::PositivityDrop
                    },
                    premises: ts
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .map(|(_, t)| Constraint::new(t.clone(), Rel::Ge, Expr::zero()))
                        .collect(),
                    before: e.clone(),
                    after: ts[j].clone(),
                    relation: StepRelation::AtLeast,
                });
                self.lower(&ts[j], false)
            }
            Expr::Product(fs) => {
                let mut k = Rational::one();
                let mut bs = Vec::new();
                for f in fs {
                    if let Expr::Const(c) = f {
                        k *= c;
                        continue;
                    }
                    self.require_nonneg(f)?;
                    let (kf, bf) = self.lower(f, false)?;
                    k *= kf;
                    bs.push(bf);
                }
                Ok((k, normalize(&Expr::Product(bs))))
            }
            Expr::Power(base, q) => {
                self.require_nonneg(base)?;
                if q.is_positive() {
                    let (k, b) = self.lower(base, false)?;
                    Ok((pow_bound(&k, q, false), b.pow(q.clone())))
                } else {
                    let (k, b) = self.upper(base)?;
                    Ok((pow_bound(&k, q, false), b.pow(q.clone())))
                }
            }
            other => Ok((Rational::one(), other.clone())),
        }
    }
}

/// A rational upper (`up`) or lower bound of `k^q`, exact for integer `q`.
fn pow_bound(k: &Rational, q: &Rational, up: bool) -> Rational {
    if q.is_integer() {
        if let Some(n) = q.to_integer().to_i32() {
            if !(k.is_zero() && n < 0) {
                return num_traits::pow::Pow::pow(k, n);
            }
        }
    }
    let v = rational_to_f64(k).powf(rational_to_f64(q));
    let mut x = v;
    for _ in 0..4 {
        x = if up { x.next_up() } else { x.next_down() };
    }
    if !up {
        x = x.max(0.0);
    }
    rational_from_f64(x).unwrap_or_else(|| if up { int(i64::MAX) } else { Rational::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::evaluate;
    use crate::region::{constraint, lower};
    use crate::sampling::sample_region;

    fn e(s: &str) -> Expr {
        normalize(&s.parse().unwrap())
    }

    /// The double-series summand and its three regimes.
    fn summand() -> Expr {
        e("(* 1/2 (+ (* 2 d) 1) (^ h -2) (^ (+ 1 (* d (+ d 1) (^ h -2))) -1) (^ (+ 1 (* d (+ d 1) (^ h -2) (^ m -2))) -2))")
    }

    fn segment(lo: &str, hi: Option<&str>) -> Region {
        let mut cs = vec![lower("h", 1), lower("m", 1), lower("d", 0), constraint("d", Rel::Ge, lo)];
        if let Some(hi) = hi {
            cs.push(constraint("d", Rel::Le, hi));
        }
        Region::reals(&["d", "h", "m"], cs)
    }

    fn check_numerically(b: &RegimeBound) {
        for p in sample_region(&b.region, 300, 3) {
            let s = evaluate(&b.source, &p).unwrap();
            let v = evaluate(&b.bound, &p).unwrap() * rational_to_f64(&b.factor);
            assert!(s <= v * (1.0 + 1e-9), "{s} > {v} at {p:?}");
        }
    }

    #[test]
    fn double_series_regimes() {
        let low = dominate_bound(&summand(), &segment("1", Some("h"))).unwrap();
        assert_eq!(low.bound, e("(* d (^ h -2))"));
        assert!(low.factor <= int(6));
        check_numerically(&low);

        let mid = dominate_bound(&summand(), &segment("h", Some("(* h m)"))).unwrap();
        assert_eq!(mid.bound, e("(^ d -1)"));
        assert!(mid.factor <= int(8));
        check_numerically(&mid);

        let high = dominate_bound(&summand(), &segment("(* h m)", None)).unwrap();
        assert_eq!(high.bound, e("(* (^ d -5) (^ h 4) (^ m 4))"));
        assert!(high.factor <= int(16));
        check_numerically(&high);
        assert!(high.bound.node_count() < high.source.node_count());
    }

    #[test]
    fn no_dominant_term_at_zero() {
        // 2d + 1 on 0 <= d <= h: neither term dominates the other.
        let err = dominate_bound(&e("(+ (* 2 d) 1)"), &segment("0", Some("h"))).unwrap_err();
        assert!(matches!(err, SimplifyError::NoDominantTerm { .. }));
    }

    #[test]
    fn sign_change_is_reported() {
        let r = Region::reals(&["x"], vec![lower("x", 1)]);
        let err = dominate_bound(&e("(^ (+ x -2) -1)"), &r).unwrap_err();
        assert!(matches!(err, SimplifyError::PositivityUnderivable { .. }));
    }
}
