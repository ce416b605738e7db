//! Point evaluation.
//!
//! Rational subexpressions are computed exactly; the result is converted to
//! `f64` with round-to-nearest. Anything involving `log`, `exp` or an inexact
//! root falls back to `f64` arithmetic in round-to-nearest mode, where a
//! finite input may overflow to `+inf`.

use super::normalize::const_pow;
use super::{rational_from_f64, rational_to_f64, Expr, Rational};
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Variable name to finite real value.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable '{0}'")]
    Unbound(String),
    #[error("indeterminate form ({0})")]
    Indeterminate(&'static str),
}

/// Evaluates `e` at `a`.
///
/// `log` of a non-positive argument, a negative base under a fractional
/// power and division by zero are [`EvalError::Domain`]. Overflow yields
/// `+inf` (or `-inf`) rather than an error.
pub fn evaluate(e: &Expr, a: &Assignment) -> Result<f64, EvalError> {
    let exact: Option<BTreeMap<String, Rational>> = a
        .iter()
        .map(|(k, v)| rational_from_f64(*v).map(|r| (k.clone(), r)))
        .collect();
    if let Some(exact) = exact {
        if let Some(r) = evaluate_exact(e, &exact) {
            return r.map(|v| rational_to_f64(&v));
        }
    }
    eval_float(e, a)
}

/// Exact rational evaluation. Returns `None` when the expression leaves the
/// rationals (transcendental functions or irrational roots).
pub fn evaluate_exact(
    e: &Expr,
    a: &BTreeMap<String, Rational>,
) -> Option<Result<Rational, EvalError>> {
    Some(match e {
        Expr::Const(c) => Ok(c.clone()),
        Expr::Var(v) => a.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Sum(cs) => {
            let mut acc = Rational::zero();
            for c in cs {
                match evaluate_exact(c, a)? {
                    Ok(v) => acc += v,
                    Err(err) => return Some(Err(err)),
                }
            }
            Ok(acc)
        }
        Expr::Product(cs) => {
            let mut acc = Rational::from_integer(1.into());
            let mut err = None;
            for c in cs {
                match evaluate_exact(c, a)? {
                    Ok(v) => acc *= v,
                    Err(e) => {
                        err.get_or_insert(e);
                    }
                }
            }
            match err {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        }
        Expr::Power(b, q) => {
            let base = match evaluate_exact(b, a)? {
                Ok(v) => v,
                Err(e) => return Some(Err(e)),
            };
            if base.is_zero() && !q.is_positive() {
                return Some(Err(EvalError::Domain("division by zero".into())));
            }
            if base.is_negative() && !q.is_integer() {
                return Some(Err(EvalError::Domain(
                    "negative base under fractional power".into(),
                )));
            }
            Ok(const_pow(&base, q)?)
        }
        Expr::Log(arg) => {
            let v = match evaluate_exact(arg, a)? {
                Ok(v) => v,
                Err(e) => return Some(Err(e)),
            };
            if !v.is_positive() {
                return Some(Err(EvalError::Domain(format!(
                    "log of non-positive value {}",
                    rational_to_f64(&v)
                ))));
            }
            if v == Rational::from_integer(1.into()) {
                Ok(Rational::zero())
            } else {
                return None;
            }
        }
        Expr::Exp(arg) => match evaluate_exact(arg, a)? {
            Ok(v) if v.is_zero() => Ok(Rational::from_integer(1.into())),
            Ok(_) => return None,
            Err(e) => Err(e),
        },
    })
}

fn eval_float(e: &Expr, a: &Assignment) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Const(c) => rational_to_f64(c),
        Expr::Var(v) => *a.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
        Expr::Sum(cs) => {
            let mut acc = 0.0;
            for c in cs {
                acc += eval_float(c, a)?;
            }
            if acc.is_nan() {
                return Err(EvalError::Indeterminate("inf - inf"));
            }
            acc
        }
        Expr::Product(cs) => {
            let mut acc = 1.0;
            for c in cs {
                let v = eval_float(c, a)?;
                // Overflowed factors stand for huge finite values, so 0 * inf = 0.
                acc = if acc == 0.0 || v == 0.0 { 0.0 } else { acc * v };
            }
            acc
        }
        Expr::Power(b, q) => {
            let base = eval_float(b, a)?;
            let qf = rational_to_f64(q);
            if base == 0.0 && qf <= 0.0 {
                return Err(EvalError::Domain("division by zero".into()));
            }
            if q.is_integer() {
                use num_traits::ToPrimitive;
                match q.numer().to_i32() {
                    Some(n) => base.powi(n),
                    None => base.powf(qf),
                }
            } else {
                if base < 0.0 {
                    return Err(EvalError::Domain(
                        "negative base under fractional power".into(),
                    ));
                }
                base.powf(qf)
            }
        }
        Expr::Log(arg) => {
            let v = eval_float(arg, a)?;
            if v <= 0.0 {
                return Err(EvalError::Domain(format!("log of non-positive value {v}")));
            }
            v.ln()
        }
        Expr::Exp(arg) => eval_float(arg, a)?.exp(),
    };
    if v.is_nan() {
        Err(EvalError::Indeterminate("nan"))
    } else {
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asg(pairs: &[(&str, f64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn product_of_variables() {
        let e: Expr = "(* x y)".parse().unwrap();
        assert_eq!(evaluate(&e, &asg(&[("x", 3.0), ("y", 4.0)])).unwrap(), 12.0);
    }

    #[test]
    fn fenchel_young_rhs_at_corner() {
        let e: Expr = "(+ (* x (log x)) (exp y))".parse().unwrap();
        assert_eq!(evaluate(&e, &asg(&[("x", 1.0), ("y", 0.0)])).unwrap(), 1.0);
    }

    #[test]
    fn log_of_zero_is_domain_error() {
        let e: Expr = "(log x)".parse().unwrap();
        assert!(matches!(
            evaluate(&e, &asg(&[("x", 0.0)])),
            Err(EvalError::Domain(_))
        ));
    }

    #[test]
    fn overflow_is_infinite() {
        let e: Expr = "(exp x)".parse().unwrap();
        assert_eq!(evaluate(&e, &asg(&[("x", 1e4)])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn exact_path_avoids_rounding() {
        // 0.1 + 0.2 - 0.3 is not zero in floating point but is exact here
        // for the binary values actually stored.
        let e: Expr = "(+ x (* -1 x) 1/3)".parse().unwrap();
        assert_eq!(evaluate(&e, &asg(&[("x", 0.1)])).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn unbound_variable() {
        let e: Expr = "(+ x z)".parse().unwrap();
        assert_eq!(
            evaluate(&e, &asg(&[("x", 1.0)])),
            Err(EvalError::Unbound("z".into()))
        );
    }
}
