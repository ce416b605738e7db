//! Value-preserving rewrites that normalization deliberately does not do.

use super::normalize::{mk_log, mk_pow, mk_product, mk_sum};
use super::{int, normalize, Expr, Rational};
use crate::interval::{is_nonneg, is_pos, BoxBounds};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Largest number of summands `expand` will produce from one product.
const EXPAND_TERM_CAP: usize = 256;

/// Largest integer power of a sum that `expand` multiplies out.
const EXPAND_POWER_CAP: i64 = 8;

/// Replaces every occurrence of `v` by `with` and normalizes.
pub fn substitute(e: &Expr, v: &str, with: &Expr) -> Expr {
    normalize(&subst_raw(e, v, with))
}

fn subst_raw(e: &Expr, v: &str, with: &Expr) -> Expr {
    if !e.contains_var(v) {
        return e.clone();
    }
    match e {
        Expr::Var(_) => with.clone(),
        Expr::Const(_) => e.clone(),
        Expr::Sum(cs) => Expr::Sum(cs.iter().map(|c| subst_raw(c, v, with)).collect()),
        Expr::Product(cs) => Expr::Product(cs.iter().map(|c| subst_raw(c, v, with)).collect()),
        Expr::Power(b, q) => Expr::Power(Box::new(subst_raw(b, v, with)), q.clone()),
        Expr::Log(a) => Expr::Log(Box::new(subst_raw(a, v, with))),
        Expr::Exp(a) => Expr::Exp(Box::new(subst_raw(a, v, with))),
    }
}

/// Distributes products over sums and multiplies out small positive integer
/// powers of sums. Products whose expansion would exceed the term cap are
/// left factored.
pub fn expand(e: &Expr) -> Expr {
    expand_node(&normalize(e))
}

fn expand_node(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Sum(ts) => mk_sum(ts.iter().map(expand_node).collect()),
        Expr::Product(fs) => {
            let parts: Vec<Expr> = fs.iter().map(expand_node).collect();
            distribute(parts)
        }
        Expr::Power(b, q) => {
            let base = expand_node(b);
            let n = if q.is_integer() { q.to_integer().to_i64() } else { None };
            match (n, &base) {
                (Some(n), Expr::Sum(_)) if (2..=EXPAND_POWER_CAP).contains(&n) => {
                    distribute(vec![base.clone(); n as usize])
                }
                _ => match mk_pow(base, q.clone()) {
                    p @ Expr::Product(_) => expand_node(&p),
                    other => other,
                },
            }
        }
        Expr::Log(a) => mk_log(expand_node(a)),
        Expr::Exp(a) => normalize(&Expr::Exp(Box::new(expand_node(a)))),
    }
}

fn distribute(parts: Vec<Expr>) -> Expr {
    let mut acc: Vec<Expr> = vec![Expr::one()];
    for p in &parts {
        let ts = p.terms();
        if acc.len() * ts.len() > EXPAND_TERM_CAP {
            return mk_product(parts);
        }
        let mut next = Vec::with_capacity(acc.len() * ts.len());
        for a in &acc {
            for t in &ts {
                next.push(mk_product(vec![a.clone(), t.clone()]));
            }
        }
        acc = next;
    }
    mk_sum(acc)
}

/// Per-term factor table: base key to (base, exponent), plus the argument
/// of the term's exponential factor, if any.
struct TermFactors {
    powers: BTreeMap<String, (Expr, Rational)>,
    exp_arg: Option<Expr>,
}

fn term_factors(t: &Expr) -> TermFactors {
    let (_, rest) = t.split_coefficient();
    let mut powers = BTreeMap::new();
    let mut exp_arg = None;
    for f in rest.factors() {
        match f {
            Expr::Const(_) => {}
            Expr::Exp(a) => exp_arg = Some(*a),
            Expr::Power(b, q) => {
                powers.insert(b.to_string(), (*b, q));
            }
            other => {
                powers.insert(other.to_string(), (other, Rational::one()));
            }
        }
    }
    TermFactors { powers, exp_arg }
}

/// Pulls the factors shared by every term of a top-level sum out in front:
/// each common base with its smallest exponent, and a common exponential.
pub fn factor_common(e: &Expr) -> Expr {
    let Expr::Sum(ts) = e else {
        return e.clone();
    };
    let tables: Vec<TermFactors> = ts.iter().map(term_factors).collect();
    let mut common: Vec<Expr> = Vec::new();
    for (key, (base, q0)) in &tables[0].powers {
        let mut min = q0.clone();
        let mut everywhere = true;
        for t in &tables[1..] {
            match t.powers.get(key) {
                Some((_, q)) => {
                    if *q < min {
                        min = q.clone();
                    }
                }
                None => {
                    everywhere = false;
                    break;
                }
            }
        }
        if everywhere && !min.is_zero() {
            common.push(Expr::Power(Box::new(base.clone()), min));
        }
    }
    if tables.iter().all(|t| t.exp_arg.is_some()) {
        let a = tables[0].exp_arg.clone().expect("checked above");
        common.push(Expr::Exp(Box::new(a)));
    }
    if common.is_empty() {
        return e.clone();
    }
    let c = normalize(&Expr::Product(common));
    let inv = normalize(&Expr::Power(Box::new(c.clone()), int(-1)));
    let inner = mk_sum(
        ts.iter()
            .map(|t| mk_product(vec![t.clone(), inv.clone()]))
            .collect(),
    );
    mk_product(vec![c, inner])
}

/// [`factor_common`] applied bottom-up to every sum in the tree.
pub fn factor_common_deep(e: &Expr) -> Expr {
    let mapped = map_children(e, factor_common_deep);
    factor_common(&mapped)
}

fn map_children(e: &Expr, f: impl Fn(&Expr) -> Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Sum(cs) => mk_sum(cs.iter().map(&f).collect()),
        Expr::Product(cs) => mk_product(cs.iter().map(&f).collect()),
        Expr::Power(b, q) => mk_pow(f(b), q.clone()),
        Expr::Log(a) => mk_log(f(a)),
        Expr::Exp(a) => normalize(&Expr::Exp(Box::new(f(a)))),
    }
}

/// Rewrites that are valid only under sign conditions, checked on `bounds`:
/// `log(ab) = log a + log b` and `log(a^q) = q log a` for positive factors,
/// `(ab)^q = a^q b^q` and `(a^p)^q = a^(pq)` for nonnegative bases.
pub fn simplify_positive(e: &Expr, bounds: &BoxBounds) -> Expr {
    let e = map_children(e, |c| simplify_positive(c, bounds));
    match &e {
        Expr::Log(a) => match a.as_ref() {
            Expr::Product(fs) if fs.iter().all(|f| is_pos(f, bounds)) => mk_sum(
                fs.iter()
                    .map(|f| simplify_positive(&mk_log(f.clone()), bounds))
                    .collect(),
            ),
            Expr::Power(b, q) if is_pos(b, bounds) => mk_product(vec![
                Expr::Const(q.clone()),
                simplify_positive(&mk_log((**b).clone()), bounds),
            ]),
            _ => e.clone(),
        },
        Expr::Power(b, q) => match b.as_ref() {
            Expr::Product(fs)
                if fs.iter().all(|f| {
                    if q.is_negative() {
                        is_pos(f, bounds)
                    } else {
                        is_nonneg(f, bounds)
                    }
                }) =>
            {
                mk_product(
                    fs.iter()
                        .map(|f| simplify_positive(&mk_pow(f.clone(), q.clone()), bounds))
                        .collect(),
                )
            }
            Expr::Power(inner, p) if is_nonneg(inner, bounds) => {
                mk_pow((**inner).clone(), p * q)
            }
            _ => e.clone(),
        },
        _ => e,
    }
}

/// Growth class of a term as `v → ∞`: (exponential rate, power, log power).
fn growth(t: &Expr, v: &str) -> Option<(Rational, Rational, Rational)> {
    let (mut rate, mut pw, mut lp) = (Rational::zero(), Rational::zero(), Rational::zero());
    let is_v = |e: &Expr| matches!(e, Expr::Var(x) if x == v);
    for f in t.factors() {
        if !f.contains_var(v) {
            continue;
        }
        match &f {
            x if is_v(x) => pw += Rational::one(),
            Expr::Power(b, q) if is_v(b) => pw += q,
            Expr::Log(a) if is_v(a) => lp += Rational::one(),
            Expr::Power(b, q) if matches!(b.as_ref(), Expr::Log(a) if is_v(a)) => lp += q,
            Expr::Exp(a) => {
                for s in a.terms() {
                    if !s.contains_var(v) {
                        continue;
                    }
                    let (c, rest) = s.split_coefficient();
                    if !is_v(&rest) {
                        return None;
                    }
                    rate += c;
                }
            }
            _ => return None,
        }
    }
    Some((rate, pw, lp))
}

/// Factors the fastest-growing term in `v` out of every sum that sits
/// under a `log` or a power, so that interval evaluation at large `v` sees
/// `log t + log(1 + o(1))` instead of `log(t + ...)`.
pub fn factor_dominant(e: &Expr, v: &str, bounds: &BoxBounds) -> Expr {
    let e = map_children(e, |c| factor_dominant(c, v, bounds));
    let split = |s: &Expr| -> Option<(Expr, Expr)> {
        let Expr::Sum(ts) = s else { return None };
        if !s.contains_var(v) {
            return None;
        }
        let mut best: Option<((Rational, Rational, Rational), &Expr)> = None;
        for t in ts {
            let g = growth(t, v)?;
            if best.as_ref().map_or(true, |(bg, _)| g > *bg) {
                best = Some((g, t));
            }
        }
        let (_, t) = best?;
        if !is_pos(t, bounds) {
            return None;
        }
        let inv = normalize(&Expr::Power(Box::new(t.clone()), int(-1)));
        let rest = mk_sum(
            ts.iter()
                .map(|o| mk_product(vec![o.clone(), inv.clone()]))
                .collect(),
        );
        Some((t.clone(), rest))
    };
    match &e {
        Expr::Log(a) => match split(a) {
            Some((t, rest)) => mk_sum(vec![
                simplify_positive(&mk_log(t), bounds),
                mk_log(rest),
            ]),
            None => e.clone(),
        },
        Expr::Power(b, q) => match split(b) {
            Some((t, rest)) => mk_product(vec![
                simplify_positive(&mk_pow(t, q.clone()), bounds),
                mk_pow(rest, q.clone()),
            ]),
            None => e.clone(),
        },
        _ => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, Assignment};
    use crate::interval::Interval;

    fn e(s: &str) -> Expr {
        normalize(&s.parse().unwrap())
    }

    fn at(e: &Expr, pairs: &[(&str, f64)]) -> f64 {
        let a: Assignment = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        evaluate(e, &a).unwrap()
    }

    fn bx(pairs: &[(&str, f64, f64)]) -> BoxBounds {
        pairs
            .iter()
            .map(|(k, lo, hi)| (k.to_string(), Interval::new(*lo, *hi)))
            .collect()
    }

    #[test]
    fn expands_products_and_squares() {
        assert_eq!(
            expand(&e("(* (+ x 1) (+ x -1))")).to_string(),
            "(+ (^ x 2) -1)"
        );
        assert_eq!(
            expand(&e("(^ (+ x y) 2)")).to_string(),
            "(+ (* 2 x y) (^ x 2) (^ y 2))"
        );
    }

    #[test]
    fn expansion_cancels_fenchel_young_residual() {
        // 2(x log x + e^y) - x·(2 log x) = 2 e^y
        let r = e("(+ (* 2 (+ (* x (log x)) (exp y))) (* -1 x (* 2 (log x))))");
        assert_eq!(expand(&r).to_string(), "(* (exp y) 2)");
    }

    #[test]
    fn factors_shared_exponential() {
        let d = e("(+ (* -1 (exp (* -1/2 y))) (* 1/2 y (exp (* -1/2 y))))");
        let f = factor_common(&d);
        assert!(matches!(f, Expr::Product(_)), "{f}");
        for y in [0.5, 2.0, 9.0] {
            assert!((at(&f, &[("y", y)]) - at(&d, &[("y", y)])).abs() < 1e-12);
        }
    }

    #[test]
    fn factors_smallest_power() {
        let s = e("(+ (^ x 3) (* 2 (^ x 2)))");
        assert_eq!(factor_common(&s).to_string(), "(* (+ 2 x) (^ x 2))");
    }

    #[test]
    fn positive_log_rules() {
        let b = bx(&[("m", 1.0, f64::INFINITY), ("h", 1.0, f64::INFINITY)]);
        assert_eq!(
            simplify_positive(&e("(log (^ m 2))"), &b).to_string(),
            "(* (log m) 2)"
        );
        assert_eq!(
            simplify_positive(&e("(+ (log (* h m)) (* -1 (log h)))"), &b).to_string(),
            "(log m)"
        );
        // Without a sign certificate nothing happens.
        let free = BoxBounds::new();
        assert_eq!(
            simplify_positive(&e("(log (^ m 2))"), &free).to_string(),
            "(log (^ m 2))"
        );
    }

    #[test]
    fn dominant_factoring_under_log() {
        let b = bx(&[("x", 1.0, f64::INFINITY)]);
        let s = e("(log (+ 1 (^ x 2)))");
        let f = factor_dominant(&s, "x", &b);
        assert_eq!(f.to_string(), "(+ (* (log x) 2) (log (+ (^ x -2) 1)))");
    }

    #[test]
    fn substitution() {
        let s = substitute(&e("(* x y)"), "y", &e("(* 2 (log x))"));
        assert_eq!(s.to_string(), "(* (log x) 2 x)");
    }
}
