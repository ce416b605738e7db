use super::{int, Expr, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Brings an expression into canonical form.
///
/// The result has flattened sums and products with at least two children,
/// at most one constant per sum or product, no unit exponents, like terms
/// collected, like bases merged and children sorted by their serialized
/// form. Products are never distributed over sums.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(c.clone()),
        Expr::Var(v) => Expr::Var(v.clone()),
        Expr::Sum(cs) => mk_sum(cs.iter().map(normalize).collect()),
        Expr::Product(cs) => mk_product(cs.iter().map(normalize).collect()),
        Expr::Power(b, q) => mk_pow(normalize(b), q.clone()),
        Expr::Log(a) => mk_log(normalize(a)),
        Expr::Exp(a) => mk_exp(normalize(a)),
    }
}

fn sort_by_key(items: Vec<Expr>) -> Vec<Expr> {
    let mut keyed: Vec<(String, Expr)> = items.into_iter().map(|e| (e.to_string(), e)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, e)| e).collect()
}

pub(crate) fn mk_sum(children: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        match c {
            Expr::Sum(cs) => flat.extend(cs),
            other => flat.push(other),
        }
    }
    let mut constant = Rational::zero();
    let mut groups: BTreeMap<String, (Expr, Rational)> = BTreeMap::new();
    for term in flat {
        if let Expr::Const(c) = term {
            constant += c;
            continue;
        }
        let (coeff, rest) = term.split_coefficient();
        let entry = groups
            .entry(rest.to_string())
            .or_insert_with(|| (rest, Rational::zero()));
        entry.1 += coeff;
    }
    let mut out = Vec::with_capacity(groups.len() + 1);
    for (_, (rest, coeff)) in groups {
        if coeff.is_zero() {
            continue;
        }
        if coeff.is_one() {
            out.push(rest);
        } else {
            out.push(mk_product(vec![Expr::Const(coeff), rest]));
        }
    }
    if !constant.is_zero() {
        out.push(Expr::Const(constant));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(sort_by_key(out)),
    }
}

pub(crate) fn mk_product(children: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(children.len());
    let mut stack = children;
    while let Some(c) = stack.pop() {
        match c {
            Expr::Product(cs) => stack.extend(cs),
            other => flat.push(other),
        }
    }
    let mut coeff = Rational::one();
    let mut exp_args = Vec::new();
    let mut groups: BTreeMap<String, (Expr, Rational)> = BTreeMap::new();
    for f in flat {
        match f {
            Expr::Const(c) => coeff *= c,
            Expr::Exp(a) => exp_args.push(*a),
            Expr::Power(b, q) => {
                let entry = groups
                    .entry(b.to_string())
                    .or_insert_with(|| (*b, Rational::zero()));
                entry.1 += q;
            }
            other => {
                let entry = groups
                    .entry(other.to_string())
                    .or_insert_with(|| (other, Rational::zero()));
                entry.1 += Rational::one();
            }
        }
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    let mut out = Vec::new();
    let mut pending = Vec::new();
    for (_, (base, q)) in groups {
        if q.is_zero() {
            continue;
        }
        match mk_pow(base, q) {
            Expr::Const(c) => coeff *= c,
            Expr::Product(cs) => pending.extend(cs),
            Expr::Exp(a) => exp_args.push(*a),
            other => out.push(other),
        }
    }
    if !exp_args.is_empty() {
        match mk_exp(mk_sum(exp_args)) {
            Expr::Const(c) => coeff *= c,
            e @ Expr::Exp(_) => out.push(e),
            other => pending.push(other),
        }
    }
    if !pending.is_empty() {
        out.extend(pending);
        out.push(Expr::Const(coeff));
        return mk_product(out);
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    if !coeff.is_one() {
        out.push(Expr::Const(coeff));
    }
    match out.len() {
        0 => Expr::one(),
        1 => out.pop().unwrap(),
        _ => Expr::Product(sort_by_key(out)),
    }
}

/// Exact `d`-th root of a non-negative big integer, if one exists.
fn exact_root(n: &BigInt, d: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.nth_root(d);
    if num_traits::pow(r.clone(), d as usize) == *n {
        Some(r)
    } else {
        None
    }
}

/// `c^q` when it is an exact rational.
pub(crate) fn const_pow(c: &Rational, q: &Rational) -> Option<Rational> {
    if c.is_zero() {
        return if q.is_positive() {
            Some(Rational::zero())
        } else {
            None
        };
    }
    if c.is_one() {
        return Some(Rational::one());
    }
    let num = q.numer().to_i64()?;
    let den = q.denom().to_u32()?;
    if num.unsigned_abs() > 4096 {
        return None;
    }
    let base = if den == 1 {
        c.clone()
    } else {
        if c.is_negative() {
            return None;
        }
        let rn = exact_root(c.numer(), den)?;
        let rd = exact_root(c.denom(), den)?;
        Rational::new(rn, rd)
    };
    let p = num.unsigned_abs() as usize;
    let powered = num_traits::pow(base, p);
    if num < 0 {
        Some(powered.recip())
    } else {
        Some(powered)
    }
}

fn is_even_integer(q: &Rational) -> bool {
    q.is_integer() && (q.numer() % BigInt::from(2)).is_zero()
}

pub(crate) fn mk_pow(base: Expr, q: Rational) -> Expr {
    if q.is_zero() {
        return Expr::one();
    }
    if q.is_one() {
        return base;
    }
    match base {
        Expr::Const(c) => match const_pow(&c, &q) {
            Some(v) => Expr::Const(v),
            None => Expr::Power(Box::new(Expr::Const(c)), q),
        },
        Expr::Power(b, p) => {
            // (b^p)^q = b^(pq) unless p is even and q fractional: (x^2)^(1/2) = |x|.
            if is_even_integer(&p) && !q.is_integer() {
                Expr::Power(Box::new(Expr::Power(b, p)), q)
            } else {
                mk_pow(*b, p * q)
            }
        }
        Expr::Product(fs) => {
            if q.is_integer() {
                mk_product(fs.into_iter().map(|f| mk_pow(f, q.clone())).collect())
            } else {
                // Pull out positive constants with exact roots.
                let mut pulled = None;
                let mut rest = Vec::with_capacity(fs.len());
                for f in fs {
                    match &f {
                        Expr::Const(c) if c.is_positive() => match const_pow(c, &q) {
                            Some(v) => pulled = Some(v),
                            None => rest.push(f),
                        },
                        _ => rest.push(f),
                    }
                }
                let inner = if rest.len() == 1 {
                    rest.pop().unwrap()
                } else {
                    Expr::Product(rest)
                };
                let powered = match inner {
                    Expr::Product(_) => Expr::Power(Box::new(inner), q),
                    single => mk_pow(single, q),
                };
                match pulled {
                    Some(c) => mk_product(vec![Expr::Const(c), powered]),
                    None => powered,
                }
            }
        }
        Expr::Exp(a) => mk_exp(mk_product(vec![Expr::Const(q), *a])),
        other => Expr::Power(Box::new(other), q),
    }
}

pub(crate) fn mk_log(a: Expr) -> Expr {
    match a {
        Expr::Const(c) if c.is_one() => Expr::zero(),
        Expr::Exp(b) => *b,
        other => Expr::Log(Box::new(other)),
    }
}

pub(crate) fn mk_exp(a: Expr) -> Expr {
    match a {
        Expr::Const(c) if c.is_zero() => Expr::one(),
        Expr::Log(b) => *b,
        other => Expr::Exp(Box::new(other)),
    }
}

#[allow(dead_code)]
pub(crate) fn minus_one() -> Expr {
    Expr::Const(int(-1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;

    fn x() -> Expr {
        Expr::var("x")
    }
    fn y() -> Expr {
        Expr::var("y")
    }

    #[test]
    fn flattens_and_drops_zero() {
        let e = Expr::Sum(vec![Expr::Sum(vec![x(), y()]), Expr::constant(0)]);
        assert_eq!(normalize(&e), Expr::Sum(vec![x(), y()]));
    }

    #[test]
    fn folds_constants() {
        let e = Expr::Product(vec![Expr::constant(2), Expr::constant(3), x()]);
        assert_eq!(normalize(&e), Expr::Product(vec![Expr::constant(6), x()]));
    }

    #[test]
    fn drops_unit_exponent() {
        let e = Expr::Power(Box::new(Expr::Exp(Box::new(y()))), int(1));
        assert_eq!(normalize(&e), Expr::Exp(Box::new(y())));
    }

    #[test]
    fn collects_like_terms_and_bases() {
        let e = Expr::Sum(vec![x(), x(), Expr::Product(vec![x(), x()])]);
        assert_eq!(normalize(&e).to_string(), "(+ (* 2 x) (^ x 2))");
        let cancel = Expr::Product(vec![x(), Expr::Power(Box::new(x()), int(-1))]);
        assert_eq!(normalize(&cancel), Expr::one());
    }

    #[test]
    fn merges_exponentials() {
        let half = Expr::Product(vec![Expr::ratio(1, 2), y()]);
        let e = Expr::Product(vec![
            Expr::Exp(Box::new(half.clone())),
            Expr::Exp(Box::new(half)),
        ]);
        assert_eq!(normalize(&e), Expr::Exp(Box::new(y())));
    }

    #[test]
    fn keeps_abs_sensitive_powers() {
        let sq = Expr::Power(Box::new(x()), int(2));
        let e = Expr::Power(Box::new(sq.clone()), rat(1, 2));
        assert_eq!(normalize(&e), Expr::Power(Box::new(sq), rat(1, 2)));
        let cube = Expr::Power(Box::new(x()), int(3));
        let e = Expr::Power(Box::new(cube), rat(1, 3));
        assert_eq!(normalize(&e), x());
    }

    #[test]
    fn exact_constant_roots() {
        let e = Expr::Power(Box::new(Expr::constant(4)), rat(1, 2));
        assert_eq!(normalize(&e), Expr::constant(2));
        let e = Expr::Power(Box::new(Expr::constant(2)), rat(1, 2));
        assert!(matches!(normalize(&e), Expr::Power(..)));
    }

    #[test]
    fn log_exp_cancel() {
        assert_eq!(normalize(&Expr::Log(Box::new(Expr::Exp(Box::new(x()))))), x());
        assert_eq!(normalize(&Expr::Exp(Box::new(Expr::Log(Box::new(x()))))), x());
        assert_eq!(normalize(&Expr::Log(Box::new(Expr::one()))), Expr::zero());
    }
}
