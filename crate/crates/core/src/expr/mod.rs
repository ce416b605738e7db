//! Symbolic expressions over the reals.
//!
//! The node set is deliberately small: rational constants, variables, n-ary
//! sums and products, rational powers, `log` and `exp`. Subtraction is a sum
//! with a `-1` coefficient and division is a power with exponent `-1`.
//!
//! Every downstream module works on *normalized* expressions (see
//! [`normalize`]). Raw variants can be built directly for tests and by the
//! parser, but should be normalized before comparison or serialization.

mod diff;
mod eval;
mod monotone;
mod normalize;
mod rewrite;
mod sexpr;

pub use diff::differentiate;
pub use eval::{evaluate, evaluate_exact, Assignment, EvalError};
pub use monotone::{derivative_sign, monotonicity_on, structural_monotonicity, Monotonicity};
pub use normalize::normalize;
pub use rewrite::{
    expand, factor_common, factor_common_deep, factor_dominant, simplify_positive, substitute,
};
pub use sexpr::SexprError;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;

/// Exact rational number used for constants, exponents and grid constants.
pub type Rational = BigRational;

/// Builds a rational from a numerator/denominator pair.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Builds an integral rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Rational),
    Var(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Box<Expr>, Rational),
    Log(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn constant(n: i64) -> Expr {
        Expr::Const(int(n))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::Const(rat(n, d))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn zero() -> Expr {
        Expr::Const(Rational::zero())
    }

    pub fn one() -> Expr {
        Expr::Const(Rational::one())
    }

    /// Normalized sum of the given terms.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        normalize(&Expr::Sum(terms))
    }

    /// Normalized product of the given factors.
    pub fn product(factors: Vec<Expr>) -> Expr {
        normalize(&Expr::Product(factors))
    }

    pub fn pow(self, q: Rational) -> Expr {
        normalize(&Expr::Power(Box::new(self), q))
    }

    pub fn powi(self, n: i64) -> Expr {
        self.pow(int(n))
    }

    pub fn ln(self) -> Expr {
        normalize(&Expr::Log(Box::new(self)))
    }

    pub fn exp(self) -> Expr {
        normalize(&Expr::Exp(Box::new(self)))
    }

    pub fn scale(self, c: Rational) -> Expr {
        Expr::product(vec![Expr::Const(c), self])
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    /// Direct children, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Vec::new(),
            Expr::Sum(cs) | Expr::Product(cs) => cs.iter().collect(),
            Expr::Power(b, _) => vec![b.as_ref()],
            Expr::Log(a) | Expr::Exp(a) => vec![a.as_ref()],
        }
    }

    /// Number of AST nodes.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            _ => {
                for c in self.children() {
                    c.collect_vars(out);
                }
            }
        }
    }

    pub fn contains_var(&self, v: &str) -> bool {
        match self {
            Expr::Var(x) => x == v,
            _ => self.children().iter().any(|c| c.contains_var(v)),
        }
    }

    /// Number of occurrences of `v` as a leaf.
    pub fn occurrences(&self, v: &str) -> usize {
        match self {
            Expr::Var(x) => usize::from(x == v),
            _ => self.children().iter().map(|c| c.occurrences(v)).sum(),
        }
    }

    /// Top-level summands (a non-sum is its own single term).
    pub fn terms(&self) -> Vec<Expr> {
        match self {
            Expr::Sum(ts) => ts.clone(),
            other => vec![other.clone()],
        }
    }

    /// Top-level factors (a non-product is its own single factor).
    pub fn factors(&self) -> Vec<Expr> {
        match self {
            Expr::Product(fs) => fs.clone(),
            other => vec![other.clone()],
        }
    }

    /// Splits a normalized term into its rational coefficient and the rest.
    pub fn split_coefficient(&self) -> (Rational, Expr) {
        match self {
            Expr::Const(c) => (c.clone(), Expr::one()),
            Expr::Product(fs) => {
                let mut coeff = Rational::one();
                let mut rest = Vec::with_capacity(fs.len());
                for f in fs {
                    match f {
                        Expr::Const(c) => coeff *= c,
                        other => rest.push(other.clone()),
                    }
                }
                let rest = match rest.len() {
                    0 => Expr::one(),
                    1 => rest.pop().unwrap(),
                    _ => Expr::Product(rest),
                };
                (coeff, rest)
            }
            other => (Rational::one(), other.clone()),
        }
    }

    /// `true` when the expression is a (normalized) negative multiple of something.
    pub fn has_negative_coefficient(&self) -> bool {
        self.split_coefficient().0.is_negative()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        sexpr::write_sexpr(self, f)
    }
}

impl std::str::FromStr for Expr {
    type Err = SexprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        sexpr::parse_sexpr(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs.scale(int(-1))])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs.powi(-1)])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(int(-1))
    }
}

/// Formats a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Best-effort conversion to `f64` (round to nearest).
pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion from a finite `f64`.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Serde adapter that writes rationals as `"p/q"` strings.
pub mod rational_str {
    use super::{format_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_rational_str(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid rational '{s}'")))
    }
}

/// As [`rational_str`] for optional values.
pub mod opt_rational_str {
    use super::{format_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| {
                super::parse_rational_str(&s)
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid rational '{s}'")))
            })
            .transpose()
    }
}

/// Parses `p` or `p/q`.
pub fn parse_rational_str(s: &str) -> Option<Rational> {
    sexpr::parse_rational(s.trim())
}
