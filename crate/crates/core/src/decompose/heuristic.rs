//! Deterministic decomposition patterns.
//!
//! Inequalities get crossover splits between pairs of right-hand-side terms
//! (exponential against power, monomial against monomial), then max and
//! ordering covers when the claim is symmetric. Series get a ladder at the
//! indices where each denominator sum switches from its index-free part to
//! its leading index power.

use super::{DecomposeError, Decomposition};
use crate::expr::{evaluate, expand, int, normalize, simplify_positive, substitute, Expr, Rational};
use crate::interval::BoxBounds;
use crate::problem::{InequalityProblem, Problem, SeriesProblem};
use crate::region::{Constraint, Region, Rel, VarRole};
use crate::sampling::{sample_region, DEFAULT_SEED};
use num_traits::{One, Signed, Zero};

pub const MAX_CANDIDATES: usize = 8;

/// Crossover multipliers, tried in this order.
const CROSSOVER: [i64; 2] = [1, 2];

/// Candidate decompositions in priority order.
pub fn heuristic_propose(p: &Problem) -> Result<Vec<Decomposition>, DecomposeError> {
    let mut out = match p {
        Problem::Inequality(q) => inequality_candidates(q),
        Problem::Series(s) => series_candidates(s),
    };
    out.truncate(MAX_CANDIDATES);
    if out.is_empty() {
        return Err(DecomposeError::NoCandidate);
    }
    Ok(out)
}

fn inequality_candidates(q: &InequalityProblem) -> Vec<Decomposition> {
    let mut out: Vec<Decomposition> = Vec::new();
    let push = |d: Decomposition, out: &mut Vec<Decomposition>| {
        if !out.contains(&d) {
            out.push(d);
        }
    };
    let vars: Vec<String> = q
        .region
        .vars
        .iter()
        .filter(|d| d.role == VarRole::Real)
        .map(|d| d.name.clone())
        .collect();
    let sym = (2..=3).contains(&vars.len()) && symmetric(q, &vars);
    let terms = q.rhs.terms();
    for (i, t1) in terms.iter().enumerate() {
        for t2 in &terms[i + 1..] {
            for (v, theta, exp) in crossovers(t1, t2).into_iter().chain(crossovers(t2, t1)) {
                // Ordering covers subsume monomial crossovers of a symmetric claim.
                if !q.region.declares(&v) || (sym && !exp) {
                    continue;
                }
                for c in CROSSOVER {
                    let th = normalize(&theta.clone().scale(int(c)));
                    let x = Expr::var(&v);
                    let lo = Constraint::new(x.clone(), Rel::Le, th.clone());
                    let hi = Constraint::new(x, Rel::Gt, th);
                    push(Decomposition::from_extras(&q.region, &[vec![lo], vec![hi]]), &mut out);
                }
            }
        }
    }
    if sym {
        push(max_cover(&q.region, &vars), &mut out);
        push(ordering_cover(&q.region, &vars), &mut out);
    }
    out
}

/// Thresholds `(v, theta)` at which `t_exp` (carrying `e^{a v}`) overtakes
/// the `v`-free term `t_other`, or a monomial in `v` overtakes another.
/// The flag marks the exponential pattern.
fn crossovers(t_exp: &Expr, t_other: &Expr) -> Vec<(String, Expr, bool)> {
    let mut out = Vec::new();
    let (_, body) = t_exp.split_coefficient();
    let factors = body.factors();
    for (k, f) in factors.iter().enumerate() {
        let rest: Vec<Expr> = factors
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, g)| g.clone())
            .collect();
        match f {
            Expr::Exp(arg) => {
                for v in arg.free_vars() {
                    if t_other.contains_var(&v) || rest.iter().any(|g| g.contains_var(&v)) {
                        continue;
                    }
                    let rate = normalize(&(arg.as_ref().clone() / Expr::var(&v)));
                    let Some(a) = rate.as_const().filter(|a| a.is_positive()) else {
                        continue;
                    };
                    let (Some(lt), Some(lr)) = (log_weight(t_other), log_weight(&Expr::product(rest.clone())))
                    else {
                        continue;
                    };
                    let theta = normalize(&(lt - lr).scale(a.recip()));
                    if !theta.is_const() {
                        out.push((v, theta, true));
                    }
                }
            }
            Expr::Var(_) | Expr::Power(..) => {
                let Some((v, b)) = var_power(f) else {
                    continue;
                };
                if t_other.contains_var(&v)
                    || rest.iter().any(|g| g.contains_var(&v))
                    || !is_monomial(t_other)
                    || !rest.iter().all(is_monomial)
                {
                    continue;
                }
                let (_, other) = t_other.split_coefficient();
                let theta = normalize(&(other / Expr::product(rest.clone())).pow(b.recip()));
                if !theta.is_const() {
                    out.push((v, theta, false));
                }
            }
            _ => {}
        }
    }
    out
}

/// `v^b` with `b > 0`.
fn var_power(f: &Expr) -> Option<(String, Rational)> {
    match f {
        Expr::Var(v) => Some((v.clone(), Rational::one())),
        Expr::Power(b, q) if q.is_positive() => match b.as_ref() {
            Expr::Var(v) => Some((v.clone(), q.clone())),
            _ => None,
        },
        _ => None,
    }
}

fn is_monomial(e: &Expr) -> bool {
    e.factors().iter().all(|f| {
        matches!(f, Expr::Const(_) | Expr::Var(_))
            || matches!(f, Expr::Power(b, _) if matches!(b.as_ref(), Expr::Var(_)))
    })
}

/// Leading logarithm of a power-law term: `sum p_i log x_i`, ignoring
/// constants and log factors. `None` for anything else.
fn log_weight(e: &Expr) -> Option<Expr> {
    let mut acc = Vec::new();
    for f in e.factors() {
        match &f {
            Expr::Const(c) if c.is_positive() => {}
            Expr::Log(_) => {}
            Expr::Var(v) => acc.push(Expr::var(v).ln()),
            Expr::Power(b, q) => match b.as_ref() {
                Expr::Var(v) => acc.push(Expr::var(v).ln().scale(q.clone())),
                _ => return None,
            },
            _ => return None,
        }
    }
    Some(Expr::sum(acc))
}

fn swap(e: &Expr, a: &str, b: &str) -> Expr {
    let tmp = Expr::var("__swap");
    let e = substitute(e, a, &tmp);
    let e = substitute(&e, b, &Expr::var(a));
    normalize(&substitute(&e, "__swap", &Expr::var(b)))
}

fn symmetric(q: &InequalityProblem, vars: &[String]) -> bool {
    let mut keys: Vec<String> = q.region.constraints.iter().map(Constraint::key).collect();
    keys.sort();
    vars.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let mut swapped: Vec<String> = q
            .region
            .constraints
            .iter()
            .map(|c| Constraint::new(swap(&c.lhs, a, b), c.rel, swap(&c.rhs, a, b)).key())
            .collect();
        swapped.sort();
        swap(&q.lhs, a, b) == normalize(&q.lhs)
            && swap(&q.rhs, a, b) == normalize(&q.rhs)
            && swapped == keys
    })
}

/// Piece `i`: `x_i` is a maximum.
fn max_cover(r: &Region, vars: &[String]) -> Decomposition {
    let extras: Vec<Vec<Constraint>> = vars
        .iter()
        .map(|v| {
            vars.iter()
                .filter(|w| *w != v)
                .map(|w| Constraint::new(Expr::var(w), Rel::Le, Expr::var(v)))
                .collect()
        })
        .collect();
    Decomposition::from_extras(r, &extras)
}

/// One piece per ordering `x_{s(1)} <= ... <= x_{s(n)}`.
fn ordering_cover(r: &Region, vars: &[String]) -> Decomposition {
    let extras: Vec<Vec<Constraint>> = permutations(vars)
        .into_iter()
        .map(|p| {
            p.windows(2)
                .map(|w| Constraint::new(Expr::var(&w[0]), Rel::Le, Expr::var(&w[1])))
                .collect()
        })
        .collect();
    Decomposition::from_extras(r, &extras)
}

pub(crate) fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn series_candidates(s: &SeriesProblem) -> Vec<Decomposition> {
    let hull = s.params_region.bounds();
    let mut points: Vec<Expr> = Vec::new();
    for f in s.summand.factors() {
        let Expr::Power(base, q) = &f else {
            continue;
        };
        if !q.is_negative() || !matches!(base.as_ref(), Expr::Sum(_)) {
            continue;
        }
        if let Some(p) = transition(&expand(base), &s.index, &hull) {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Vec::new();
    }
    let probe = sample_region(&s.params_region, 1, DEFAULT_SEED).pop();
    if let Some(a) = probe {
        points.sort_by(|x, y| {
            let vx = evaluate(x, &a).unwrap_or(f64::NAN);
            let vy = evaluate(y, &a).unwrap_or(f64::NAN);
            vx.total_cmp(&vy)
        });
    }
    vec![Decomposition::Breakpoints { ladder: points }]
}

/// Index value where `A + B d^a` (A index-free, a leading) has `B d^a = A`,
/// with constant factors dropped.
fn transition(sum: &Expr, d: &str, hull: &BoxBounds) -> Option<Expr> {
    let mut free = Vec::new();
    let mut lead: Option<(Rational, Expr)> = None;
    for t in sum.terms() {
        if !t.contains_var(d) {
            free.push(t);
            continue;
        }
        let mut deg = Rational::zero();
        let mut rest = Vec::new();
        for f in t.factors() {
            match var_power(&f) {
                Some((v, b)) if v == d => deg += b,
                _ if f.contains_var(d) => return None,
                _ => rest.push(f),
            }
        }
        if lead.as_ref().map_or(true, |(a, _)| deg > *a) {
            lead = Some((deg, Expr::product(rest)));
        }
    }
    let (a, b) = lead?;
    if free.len() != 1 || !a.is_positive() {
        return None;
    }
    let raw = simplify_positive(&normalize(&(free.pop()? / b).pow(a.recip())), hull);
    let (_, shape) = raw.split_coefficient();
    (!shape.is_const()).then_some(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latex::parse_problem;

    fn extras(d: &Decomposition, p: &Problem) -> Vec<String> {
        d.describe(p)
    }

    #[test]
    fn fenchel_young_split_includes_factor_two() {
        let p = parse_problem(r"x y \ll x \log x + e^y, x \geq 1, y \geq 0").unwrap();
        let cands = heuristic_propose(&p).unwrap();
        let shown: Vec<Vec<String>> = cands.iter().map(|d| extras(d, &p)).collect();
        assert_eq!(shown[0], vec![r"y \leq \log\left(x\right)", r"y > \log\left(x\right)"]);
        assert_eq!(shown[1], vec![r"y \leq 2 \log\left(x\right)", r"y > 2 \log\left(x\right)"]);
    }

    #[test]
    fn series_ladder_at_transitions() {
        let p = parse_problem(
            r"\sum_{d=0}^{\infty} \frac{2d+1}{2h^2 (1 + \frac{d(d+1)}{h^2}) (1 + \frac{d(d+1)}{h^2 m^2})^2} \ll 1 + \log(m^2), h \geq 1, m \geq 1",
        )
        .unwrap();
        let cands = heuristic_propose(&p).unwrap();
        assert_eq!(
            cands,
            vec![Decomposition::Breakpoints {
                ladder: vec![Expr::var("h"), normalize(&(Expr::var("h") * Expr::var("m")))]
            }]
        );
    }

    #[test]
    fn symmetric_problems_get_max_and_ordering_covers() {
        let p = parse_problem(r"x y z \ll x^3 + y^3 + z^3, x \geq 0, y \geq 0, z \geq 0").unwrap();
        let cands = heuristic_propose(&p).unwrap();
        let sizes: Vec<usize> = cands.iter().map(Decomposition::len).collect();
        assert!(sizes.ends_with(&[3, 6]), "{sizes:?}");
    }

    #[test]
    fn no_pattern_is_reported() {
        let p = parse_problem(r"\log x \ll x, x \geq 1").unwrap();
        assert_eq!(heuristic_propose(&p), Err(DecomposeError::NoCandidate));
    }

    #[test]
    fn proposal_is_deterministic() {
        let p = parse_problem(r"x y \ll x \log x + e^y, x \geq 1, y \geq 0").unwrap();
        assert_eq!(heuristic_propose(&p), heuristic_propose(&p));
    }
}
