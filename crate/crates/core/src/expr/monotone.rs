//! Sound monotonicity analysis in a single variable.
//!
//! A structural rule base runs first; when it cannot decide, the sign of the
//! factored derivative is checked by interval evaluation on the region's box
//! hull. The hull contains every segment between two region points that
//! differ only in `v`, so a certified sign on the hull is sufficient.

use super::{differentiate, factor_common_deep, Expr, Rational};
use crate::interval::{eval_expr, BoxBounds, Interval};
use crate::region::Region;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mono {
    Const,
    Inc,
    Dec,
    Unknown,
}

impl Mono {
    fn flip(self) -> Mono {
        match self {
            Mono::Inc => Mono::Dec,
            Mono::Dec => Mono::Inc,
            other => other,
        }
    }

    fn join(self, o: Mono) -> Mono {
        match (self, o) {
            (Mono::Const, x) | (x, Mono::Const) => x,
            (Mono::Inc, Mono::Inc) => Mono::Inc,
            (Mono::Dec, Mono::Dec) => Mono::Dec,
            _ => Mono::Unknown,
        }
    }

    /// `outer ∘ inner` for an outer map of the given monotonicity.
    fn compose(outer: Mono, inner: Mono) -> Mono {
        match (outer, inner) {
            (_, Mono::Const) => Mono::Const,
            (Mono::Const, _) => Mono::Const,
            (Mono::Inc, x) => x,
            (Mono::Dec, x) => x.flip(),
            _ => Mono::Unknown,
        }
    }
}

/// Monotonicity of `e` in `v` on the region `r`.
///
/// A function constant in `v` is reported as `Increasing`.
pub fn structural_monotonicity(e: &Expr, v: &str, r: &Region) -> Monotonicity {
    monotonicity_on(e, v, &r.bounds())
}

/// Monotonicity of `e` in `v` on a box.
pub fn monotonicity_on(e: &Expr, v: &str, bounds: &BoxBounds) -> Monotonicity {
    match rule(e, v, bounds) {
        Mono::Const | Mono::Inc => Monotonicity::Increasing,
        Mono::Dec => Monotonicity::Decreasing,
        Mono::Unknown => derivative_sign(e, v, bounds),
    }
}

/// Monotonicity from a certified sign of the derivative on the box.
pub fn derivative_sign(e: &Expr, v: &str, bounds: &BoxBounds) -> Monotonicity {
    let d = factor_common_deep(&differentiate(e, v));
    match sign_of(&d, bounds) {
        Some(s) if s >= 0 => Monotonicity::Increasing,
        Some(_) => Monotonicity::Decreasing,
        None => Monotonicity::Unknown,
    }
}

/// `Some(1)` if `e ≥ 0` on the box, `Some(-1)` if `e ≤ 0`, else `None`.
/// Products are signed factor by factor, which is tighter than evaluating
/// the whole product.
fn sign_of(e: &Expr, bounds: &BoxBounds) -> Option<i32> {
    match e {
        Expr::Product(fs) => {
            let mut s = 1;
            for f in fs {
                s *= sign_of(f, bounds)?;
            }
            Some(s)
        }
        Expr::Exp(_) => Some(1),
        _ => {
            let i = eval_expr(e, bounds).ok()?;
            if i.lo >= 0.0 {
                Some(1)
            } else if i.hi <= 0.0 {
                Some(-1)
            } else {
                None
            }
        }
    }
}

fn range(e: &Expr, bounds: &BoxBounds) -> Option<Interval> {
    eval_expr(e, bounds).ok()
}

fn rule(e: &Expr, v: &str, bounds: &BoxBounds) -> Mono {
    if !e.contains_var(v) {
        return Mono::Const;
    }
    match e {
        Expr::Const(_) => Mono::Const,
        Expr::Var(_) => Mono::Inc,
        Expr::Sum(ts) => ts
            .iter()
            .fold(Mono::Const, |acc, t| acc.join(rule(t, v, bounds))),
        Expr::Product(fs) => {
            // Make every factor nonnegative by pulling out signs, then a
            // product of nonnegative factors inherits a shared direction.
            let mut negate = false;
            let mut acc = Mono::Const;
            for f in fs {
                let Some(i) = range(f, bounds) else {
                    return Mono::Unknown;
                };
                let m = rule(f, v, bounds);
                let m = if i.lo >= 0.0 {
                    m
                } else if i.hi <= 0.0 {
                    negate = !negate;
                    m.flip()
                } else {
                    return Mono::Unknown;
                };
                acc = acc.join(m);
                if acc == Mono::Unknown {
                    return Mono::Unknown;
                }
            }
            if negate {
                acc.flip()
            } else {
                acc
            }
        }
        Expr::Power(b, q) => {
            let Some(i) = range(b, bounds) else {
                return Mono::Unknown;
            };
            Mono::compose(power_direction(q, &i), rule(b, v, bounds))
        }
        Expr::Log(a) | Expr::Exp(a) => Mono::compose(Mono::Inc, rule(a, v, bounds)),
    }
}

/// Direction of `t ↦ t^q` on the interval `i`.
fn power_direction(q: &Rational, i: &Interval) -> Mono {
    if q.is_zero() {
        return Mono::Const;
    }
    let parity = if q.is_integer() {
        Some(q.numer().is_even())
    } else {
        None
    };
    let odd = parity == Some(false);
    let even = parity == Some(true);
    if q.is_positive() {
        if i.lo >= 0.0 || odd {
            Mono::Inc
        } else if even && i.hi <= 0.0 {
            Mono::Dec
        } else {
            Mono::Unknown
        }
    } else if i.lo > 0.0 || (odd && i.hi < 0.0) {
        Mono::Dec
    } else if even && i.hi < 0.0 {
        Mono::Inc
    } else {
        Mono::Unknown
    }
}
