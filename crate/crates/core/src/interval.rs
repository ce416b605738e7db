//! Outward-rounded interval arithmetic over `f64`.
//!
//! Basic operations (`+ - * /`) are correctly rounded in IEEE arithmetic, so
//! one ulp of outward widening per operation encloses the exact result.
//! `ln`, `exp` and `powf` come from the platform libm; their results are
//! widened by four ulps. Infinite endpoints are allowed, and `0 * inf` is
//! taken as `0` since every endpoint is a limit of finite values.

use crate::expr::{rational_from_f64, rational_to_f64, Expr, Rational};
use num_traits::{Signed, ToPrimitive};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IntervalError {
    #[error("possibly undefined: {0}")]
    Undefined(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn dn(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

fn dn4(x: f64) -> f64 {
    dn(dn(dn(dn(x))))
}

fn up4(x: f64) -> f64 {
    up(up(up(up(x))))
}

// Error-free transforms decide whether a rounded result is exact; only
// inexact results are widened.

fn sum_is_exact(a: f64, b: f64, s: f64) -> bool {
    if !s.is_finite() {
        return false;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    err == 0.0
}

fn add_dn(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() && (a.is_infinite() || b.is_infinite()) {
        return s;
    }
    if s == f64::INFINITY {
        return f64::MAX;
    }
    if sum_is_exact(a, b, s) {
        s
    } else {
        dn(s)
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() && (a.is_infinite() || b.is_infinite()) {
        return s;
    }
    if s == f64::NEG_INFINITY {
        return f64::MIN;
    }
    if sum_is_exact(a, b, s) {
        s
    } else {
        up(s)
    }
}

fn mul_exact(a: f64, b: f64) -> Option<f64> {
    if a == 0.0 || b == 0.0 {
        return Some(0.0);
    }
    if a.is_infinite() || b.is_infinite() {
        return Some(a * b);
    }
    let p = a * b;
    (p.is_finite() && p != 0.0 && a.mul_add(b, -p) == 0.0).then_some(p)
}

fn mul_dn(a: f64, b: f64) -> f64 {
    mul_exact(a, b).unwrap_or_else(|| {
        let p = a * b;
        if p == f64::INFINITY {
            f64::MAX
        } else {
            dn(p)
        }
    })
}

fn mul_up(a: f64, b: f64) -> f64 {
    mul_exact(a, b).unwrap_or_else(|| {
        let p = a * b;
        if p == f64::NEG_INFINITY {
            f64::MIN
        } else {
            up(p)
        }
    })
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        debug_assert!(lo <= hi, "bad interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    /// Tight enclosure of an exact rational.
    pub fn from_rational(r: &Rational) -> Interval {
        let f = rational_to_f64(r);
        if rational_from_f64(f).as_ref() == Some(r) {
            Interval::point(f)
        } else {
            Interval {
                lo: dn(dn(f)),
                hi: up(up(f)),
            }
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Intersection, or `None` if disjoint.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval {
            lo: add_dn(self.lo, o.lo),
            hi: add_up(self.hi, o.hi),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn sub(self, o: Interval) -> Interval {
        self.add(o.neg())
    }

    pub fn mul(self, o: Interval) -> Interval {
        let pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let lo = pairs
            .iter()
            .map(|&(a, b)| mul_dn(a, b))
            .fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(a, b)| mul_up(a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    pub fn recip(self) -> Result<Interval, IntervalError> {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            return Err(IntervalError::Undefined("division by an interval containing 0"));
        }
        let lo = 1.0 / self.hi;
        let hi = 1.0 / self.lo;
        let (lo, hi) = if self.lo > 0.0 {
            (lo.max(0.0), hi)
        } else {
            (lo, hi.min(0.0))
        };
        // 1/x is exact when x·(1/x) - 1 vanishes under a fused multiply-add.
        let exact = |x: f64, r: f64| r == 0.0 || (r.is_finite() && x.mul_add(r, -1.0) == 0.0);
        Ok(Interval {
            lo: if exact(self.hi, lo) { lo } else { dn(lo) },
            hi: if exact(self.lo, hi) { hi } else { up(hi) },
        })
    }

    /// `x^n` for `x >= 0`, rounded in one direction, by repeated squaring.
    fn pow_nonneg(x: f64, n: u32, round_up: bool) -> f64 {
        let mul = |a: f64, b: f64| if round_up { mul_up(a, b) } else { mul_dn(a, b).max(0.0) };
        let (mut acc, mut base, mut k) = (1.0f64, x, n);
        while k > 0 {
            if k & 1 == 1 {
                acc = mul(acc, base);
            }
            k >>= 1;
            if k > 0 {
                base = mul(base, base);
            }
        }
        acc
    }

    pub fn powi(self, n: i64) -> Result<Interval, IntervalError> {
        if n == 0 {
            return Ok(Interval::point(1.0));
        }
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let m = n.min(u32::MAX as i64) as u32;
        let pd = |x: f64| Self::pow_nonneg(x, m, false);
        let pu = |x: f64| Self::pow_nonneg(x, m, true);
        if m == 1 {
            return Ok(self);
        }
        Ok(if m % 2 == 0 {
            if self.lo >= 0.0 {
                Interval::new(pd(self.lo), pu(self.hi))
            } else if self.hi <= 0.0 {
                Interval::new(pd(-self.hi), pu(-self.lo))
            } else {
                Interval::new(0.0, pu((-self.lo).max(self.hi)))
            }
        } else {
            let lo = if self.lo >= 0.0 { pd(self.lo) } else { -pu(-self.lo) };
            let hi = if self.hi >= 0.0 { pu(self.hi) } else { -pd(-self.hi) };
            Interval::new(lo, hi)
        })
    }

    /// `self^q` for a rational exponent.
    pub fn pow(self, q: &Rational) -> Result<Interval, IntervalError> {
        if q.is_integer() {
            if let Some(n) = q.numer().to_i64() {
                return self.powi(n);
            }
        }
        let qf = rational_to_f64(q);
        if q.is_positive() {
            if self.lo < 0.0 {
                return Err(IntervalError::Undefined("negative base under fractional power"));
            }
            let lo = if self.lo == 0.0 {
                0.0
            } else {
                let v = self.lo.powf(qf);
                if v.is_infinite() && self.lo.is_finite() {
                    f64::MAX
                } else {
                    dn4(v).max(0.0)
                }
            };
            Ok(Interval::new(lo, up4(self.hi.powf(qf))))
        } else {
            if self.lo <= 0.0 {
                return Err(IntervalError::Undefined("non-positive base under negative power"));
            }
            let lo = if self.hi.is_infinite() { 0.0 } else { dn4(self.hi.powf(qf)).max(0.0) };
            Ok(Interval::new(lo, up4(self.lo.powf(qf))))
        }
    }

    pub fn ln(self) -> Result<Interval, IntervalError> {
        if self.lo <= 0.0 {
            return Err(IntervalError::Undefined("log of a possibly non-positive value"));
        }
        let lo = if self.lo == 1.0 { 0.0 } else { dn4(self.lo.ln()) };
        let hi = if self.hi == 1.0 { 0.0 } else { up4(self.hi.ln()) };
        Ok(Interval::new(lo, hi))
    }

    pub fn exp(self) -> Interval {
        let lo = if self.lo == 0.0 {
            1.0
        } else {
            let v = self.lo.exp();
            if v.is_infinite() {
                f64::MAX
            } else {
                dn4(v).max(0.0)
            }
        };
        let hi = if self.hi == 0.0 { 1.0 } else { up4(self.hi.exp()) };
        Interval::new(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Per-variable bounds.
pub type BoxBounds = BTreeMap<String, Interval>;

#[derive(Clone, Debug)]
enum Op {
    Const(f64, Interval),
    Var(usize),
    Add(usize),
    Mul(usize),
    Pow(Rational, f64, Option<i32>),
    Ln,
    Exp,
}

/// An expression compiled to a postfix program over numbered variable slots.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    vars: Vec<String>,
}

impl Tape {
    /// Compiles `e`; `vars` fixes the slot order. Variables of `e` missing from
    /// `vars` are appended.
    pub fn compile(e: &Expr, vars: &[String]) -> Tape {
        let mut t = Tape {
            ops: Vec::new(),
            vars: vars.to_vec(),
        };
        t.emit(e);
        t
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    fn slot(&mut self, v: &str) -> usize {
        match self.vars.iter().position(|x| x == v) {
            Some(i) => i,
            None => {
                self.vars.push(v.to_string());
                self.vars.len() - 1
            }
        }
    }

    fn emit(&mut self, e: &Expr) {
        match e {
            Expr::Const(c) => self
                .ops
                .push(Op::Const(rational_to_f64(c), Interval::from_rational(c))),
            Expr::Var(v) => {
                let s = self.slot(v);
                self.ops.push(Op::Var(s));
            }
            Expr::Sum(cs) => {
                for c in cs {
                    self.emit(c);
                }
                self.ops.push(Op::Add(cs.len()));
            }
            Expr::Product(cs) => {
                for c in cs {
                    self.emit(c);
                }
                self.ops.push(Op::Mul(cs.len()));
            }
            Expr::Power(b, q) => {
                self.emit(b);
                let int = if q.is_integer() { q.numer().to_i32() } else { None };
                self.ops.push(Op::Pow(q.clone(), rational_to_f64(q), int));
            }
            Expr::Log(a) => {
                self.emit(a);
                self.ops.push(Op::Ln);
            }
            Expr::Exp(a) => {
                self.emit(a);
                self.ops.push(Op::Exp);
            }
        }
    }

    /// Floating-point evaluation; `None` on a domain violation or NaN.
    pub fn eval_f64(&self, x: &[f64]) -> Option<f64> {
        let mut st: Vec<f64> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(v, _) => st.push(*v),
                Op::Var(i) => st.push(x[*i]),
                Op::Add(n) => {
                    let at = st.len() - n;
                    let s: f64 = st.drain(at..).sum();
                    st.push(s);
                }
                Op::Mul(n) => {
                    let at = st.len() - n;
                    let p = st
                        .drain(at..)
                        .fold(1.0, |acc, v| if acc == 0.0 || v == 0.0 { 0.0 } else { acc * v });
                    st.push(p);
                }
                Op::Pow(_, qf, int) => {
                    let b = st.pop()?;
                    let v = match int {
                        Some(n) => {
                            if b == 0.0 && *n < 0 {
                                return None;
                            }
                            b.powi(*n)
                        }
                        None => {
                            if b < 0.0 || (b == 0.0 && *qf < 0.0) {
                                return None;
                            }
                            b.powf(*qf)
                        }
                    };
                    st.push(v);
                }
                Op::Ln => {
                    let a = st.pop()?;
                    if a <= 0.0 {
                        return None;
                    }
                    st.push(a.ln());
                }
                Op::Exp => {
                    let a = st.pop()?;
                    st.push(a.exp());
                }
            }
        }
        let v = st.pop()?;
        (!v.is_nan()).then_some(v)
    }

    pub fn eval_interval(&self, x: &[Interval]) -> Result<Interval, IntervalError> {
        let mut st: Vec<Interval> = Vec::with_capacity(16);
        for op in &self.ops {
            match op {
                Op::Const(_, iv) => st.push(*iv),
                Op::Var(i) => st.push(x[*i]),
                Op::Add(n) => {
                    let at = st.len() - n;
                    let s = st
                        .drain(at..)
                        .reduce(|a, b| a.add(b))
                        .unwrap_or(Interval::point(0.0));
                    st.push(s);
                }
                Op::Mul(n) => {
                    let at = st.len() - n;
                    let p = st
                        .drain(at..)
                        .reduce(|a, b| a.mul(b))
                        .unwrap_or(Interval::point(1.0));
                    st.push(p);
                }
                Op::Pow(q, _, _) => {
                    let b = st.pop().expect("tape underflow");
                    st.push(b.pow(q)?);
                }
                Op::Ln => {
                    let a = st.pop().expect("tape underflow");
                    st.push(a.ln()?);
                }
                Op::Exp => {
                    let a = st.pop().expect("tape underflow");
                    st.push(a.exp());
                }
            }
        }
        let r = st.pop().expect("empty tape");
        if r.lo.is_nan() || r.hi.is_nan() {
            return Err(IntervalError::Undefined("nan"));
        }
        Ok(r)
    }
}

/// Interval enclosure of `e` over `bounds`. Unbound variables are taken as
/// the whole real line.
pub fn eval_expr(e: &Expr, bounds: &BoxBounds) -> Result<Interval, IntervalError> {
    let vars: Vec<String> = e.free_vars().into_iter().collect();
    let tape = Tape::compile(e, &vars);
    let xs: Vec<Interval> = vars
        .iter()
        .map(|v| bounds.get(v).copied().unwrap_or(Interval::ENTIRE))
        .collect();
    tape.eval_interval(&xs)
}

/// Sign information derived from an enclosure.
pub fn is_nonneg(e: &Expr, bounds: &BoxBounds) -> bool {
    eval_expr(e, bounds).map(|i| i.lo >= 0.0).unwrap_or(false)
}

pub fn is_pos(e: &Expr, bounds: &BoxBounds) -> bool {
    eval_expr(e, bounds).map(|i| i.lo > 0.0).unwrap_or(false)
}

pub fn is_nonpos(e: &Expr, bounds: &BoxBounds) -> bool {
    eval_expr(e, bounds).map(|i| i.hi <= 0.0).unwrap_or(false)
}

/// `true` when the rational is known to be negative (convenience for callers).
pub fn rational_is_negative(r: &Rational) -> bool {
    r.is_negative()
}
