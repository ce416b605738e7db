use super::{int, normalize, Expr, Rational};
use num_traits::One;

/// Symbolic derivative with respect to `v`, normalized.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    normalize(&raw(e, v))
}

fn raw(e: &Expr, v: &str) -> Expr {
    if !e.contains_var(v) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(x) => {
            if x == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(cs) => Expr::Sum(cs.iter().map(|c| raw(c, v)).collect()),
        Expr::Product(cs) => {
            let mut terms = Vec::with_capacity(cs.len());
            for (i, c) in cs.iter().enumerate() {
                if !c.contains_var(v) {
                    continue;
                }
                let mut factors: Vec<Expr> = cs.clone();
                factors[i] = raw(c, v);
                terms.push(Expr::Product(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Power(b, q) => Expr::Product(vec![
            Expr::Const(q.clone()),
            Expr::Power(b.clone(), q - Rational::one()),
            raw(b, v),
        ]),
        Expr::Log(a) => Expr::Product(vec![raw(a, v), Expr::Power(a.clone(), int(-1))]),
        Expr::Exp(a) => Expr::Product(vec![e.clone(), raw(a, v)]),
    }
}
