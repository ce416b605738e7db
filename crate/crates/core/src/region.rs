//! Domains: conjunctions of constraints over declared variables.

use crate::expr::{evaluate, int, normalize, Assignment, EvalError, Expr};
use crate::interval::{eval_expr, is_nonneg, is_pos, BoxBounds, Interval};
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
}

impl Rel {
    /// The relation with its sides swapped (`a <= b` iff `b >= a`).
    pub fn flip(self) -> Rel {
        match self {
            Rel::Le => Rel::Ge,
            Rel::Lt => Rel::Gt,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
            Rel::Eq => Rel::Eq,
        }
    }

    /// Logical negation, if expressible.
    pub fn negate(self) -> Option<Rel> {
        match self {
            Rel::Le => Some(Rel::Gt),
            Rel::Lt => Some(Rel::Ge),
            Rel::Ge => Some(Rel::Lt),
            Rel::Gt => Some(Rel::Le),
            Rel::Eq => None,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Rel::Le | Rel::Lt)
    }

    pub fn is_lower(self) -> bool {
        matches!(self, Rel::Ge | Rel::Gt)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Lt | Rel::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
        }
    }

    pub fn holds(self, l: f64, r: f64) -> bool {
        match self {
            Rel::Le => l <= r,
            Rel::Lt => l < r,
            Rel::Ge => l >= r,
            Rel::Gt => l > r,
            Rel::Eq => l == r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub lhs: Expr,
    pub rel: Rel,
    pub rhs: Expr,
}

impl Constraint {
    pub fn new(lhs: Expr, rel: Rel, rhs: Expr) -> Constraint {
        Constraint {
            lhs: normalize(&lhs),
            rel,
            rhs: normalize(&rhs),
        }
    }

    pub fn negate(&self) -> Option<Constraint> {
        self.rel.negate().map(|rel| Constraint {
            lhs: self.lhs.clone(),
            rel,
            rhs: self.rhs.clone(),
        })
    }

    /// The same constraint with the sides swapped.
    pub fn flipped(&self) -> Constraint {
        Constraint {
            lhs: self.rhs.clone(),
            rel: self.rel.flip(),
            rhs: self.lhs.clone(),
        }
    }

    /// Orientation-independent key: `a >= b` and `b <= a` share a key.
    pub fn key(&self) -> String {
        match self.rel {
            Rel::Ge | Rel::Gt => self.flipped().to_string(),
            Rel::Eq => {
                let (a, b) = (self.lhs.to_string(), self.rhs.to_string());
                if a <= b {
                    format!("{a} = {b}")
                } else {
                    format!("{b} = {a}")
                }
            }
            _ => self.to_string(),
        }
    }

    /// `true` when `other` is the logical complement of `self`.
    pub fn is_complement_of(&self, other: &Constraint) -> bool {
        self.negate().is_some_and(|n| n.key() == other.key())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut v = self.lhs.free_vars();
        v.extend(self.rhs.free_vars());
        v
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.lhs.contains_var(v) || self.rhs.contains_var(v)
    }

    /// `lhs - rhs`, normalized.
    pub fn difference(&self) -> Expr {
        self.lhs.clone() - self.rhs.clone()
    }

    pub fn holds(&self, a: &Assignment) -> Result<bool, EvalError> {
        let l = evaluate(&self.lhs, a)?;
        let r = evaluate(&self.rhs, a)?;
        Ok(self.rel.holds(l, r))
    }

    /// Interval verdict on a box: `Some(true)` if it holds everywhere,
    /// `Some(false)` if it fails everywhere, `None` otherwise.
    pub fn decide_on(&self, bounds: &BoxBounds) -> Option<bool> {
        let d = eval_expr(&self.difference(), bounds).ok()?;
        match self.rel {
            Rel::Le if d.hi <= 0.0 => Some(true),
            Rel::Le if d.lo > 0.0 => Some(false),
            Rel::Lt if d.hi < 0.0 => Some(true),
            Rel::Lt if d.lo >= 0.0 => Some(false),
            Rel::Ge if d.lo >= 0.0 => Some(true),
            Rel::Ge if d.hi < 0.0 => Some(false),
            Rel::Gt if d.lo > 0.0 => Some(true),
            Rel::Gt if d.hi <= 0.0 => Some(false),
            Rel::Eq if d.lo == 0.0 && d.hi == 0.0 => Some(true),
            Rel::Eq if d.lo > 0.0 || d.hi < 0.0 => Some(false),
            _ => None,
        }
    }

    pub fn substitute(&self, v: &str, with: &Expr) -> Constraint {
        Constraint::new(
            crate::expr::substitute(&self.lhs, v, with),
            self.rel,
            crate::expr::substitute(&self.rhs, v, with),
        )
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel.symbol(), self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    Real,
    Index,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub role: VarRole,
}

/// A one-sided bound `v rel expr` obtained by isolating `v` in a constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct VarBound {
    pub rel: Rel,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub vars: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
}

impl Region {
    pub fn new(vars: Vec<VarDecl>, constraints: Vec<Constraint>) -> Region {
        let mut r = Region {
            vars,
            constraints: Vec::new(),
        };
        for c in constraints {
            r.push(c);
        }
        r
    }

    /// Region over real variables with the given names.
    pub fn reals(names: &[&str], constraints: Vec<Constraint>) -> Region {
        Region::new(
            names
                .iter()
                .map(|n| VarDecl {
                    name: n.to_string(),
                    role: VarRole::Real,
                })
                .collect(),
            constraints,
        )
    }

    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    pub fn declares(&self, v: &str) -> bool {
        self.vars.iter().any(|d| d.name == v)
    }

    /// Adds a constraint unless an equivalent one is already present.
    pub fn push(&mut self, c: Constraint) {
        let c = Constraint::new(c.lhs, c.rel, c.rhs);
        let key = c.key();
        if !self.constraints.iter().any(|x| x.key() == key) {
            self.constraints.push(c);
        }
    }

    pub fn with(&self, extra: &[Constraint]) -> Region {
        let mut r = self.clone();
        for c in extra {
            r.push(c.clone());
        }
        r
    }

    /// Constraints referencing undeclared variables.
    pub fn undeclared(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            for v in c.free_vars() {
                if !self.declares(&v) {
                    out.insert(v);
                }
            }
        }
        out
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.constraints
            .iter()
            .all(|c| c.holds(a).unwrap_or(false))
    }

    /// Drops every constraint that mentions `v` and removes `v` itself.
    /// The result is a superset of the projection.
    pub fn eliminate(&self, v: &str) -> Region {
        Region {
            vars: self.vars.iter().filter(|d| d.name != v).cloned().collect(),
            constraints: self
                .constraints
                .iter()
                .filter(|c| !c.mentions(v))
                .cloned()
                .collect(),
        }
    }

    pub fn substitute(&self, v: &str, with: &Expr) -> Region {
        let vars = self.vars.iter().filter(|d| d.name != v).cloned().collect();
        let mut r = Region {
            vars,
            constraints: Vec::new(),
        };
        for c in &self.constraints {
            let s = c.substitute(v, with);
            // Drop constraints that became trivially true.
            if s.free_vars().is_empty() {
                if let Some(true) = s.decide_on(&BoxBounds::new()) {
                    continue;
                }
            }
            r.push(s);
        }
        r
    }

    /// Closed box hull of the region, by interval constraint propagation.
    pub fn bounds(&self) -> BoxBounds {
        let mut b: BoxBounds = self
            .vars
            .iter()
            .map(|v| (v.name.clone(), Interval::ENTIRE))
            .collect();
        for _round in 0..6 {
            let mut changed = false;
            for c in &self.constraints {
                for v in c.free_vars() {
                    for vb in isolate(c, &v, &b) {
                        let Ok(iv) = eval_expr(&vb.expr, &b) else {
                            continue;
                        };
                        let cur = b.get(&v).copied().unwrap_or(Interval::ENTIRE);
                        let mut next = cur;
                        match vb.rel {
                            Rel::Le | Rel::Lt => next.hi = next.hi.min(iv.hi),
                            Rel::Ge | Rel::Gt => next.lo = next.lo.max(iv.lo),
                            Rel::Eq => {
                                next.lo = next.lo.max(iv.lo);
                                next.hi = next.hi.min(iv.hi);
                            }
                        }
                        if next.lo > next.hi {
                            // Empty region; keep a degenerate hull.
                            next.hi = next.lo;
                        }
                        if next != cur {
                            changed = true;
                            b.insert(v.clone(), next);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        b
    }

    /// One-sided bounds on `v` from every constraint where it occurs once.
    pub fn bounds_for(&self, v: &str) -> Vec<VarBound> {
        let b = self.bounds();
        let mut out: Vec<VarBound> = Vec::new();
        for c in &self.constraints {
            for vb in isolate(c, v, &b) {
                if !out.contains(&vb) {
                    out.push(vb);
                }
            }
        }
        out
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs: Vec<String> = self.constraints.iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", cs.join(", "))
    }
}

/// Solves `c` for `v` when `v` occurs exactly once, using only inversions
/// whose monotonicity is certified on `bounds`.
pub fn isolate(c: &Constraint, v: &str, bounds: &BoxBounds) -> Vec<VarBound> {
    if c.lhs.occurrences(v) + c.rhs.occurrences(v) != 1 {
        return Vec::new();
    }
    let (mut side, mut rel, mut other) = if c.lhs.contains_var(v) {
        (c.lhs.clone(), c.rel, c.rhs.clone())
    } else {
        (c.rhs.clone(), c.rel.flip(), c.lhs.clone())
    };
    loop {
        match side {
            Expr::Var(ref x) if x == v => {
                return vec![VarBound {
                    rel,
                    expr: normalize(&other),
                }];
            }
            Expr::Sum(ts) => {
                let (inner, rest): (Vec<Expr>, Vec<Expr>) =
                    ts.into_iter().partition(|t| t.contains_var(v));
                other = other - Expr::sum(rest);
                side = inner.into_iter().next().expect("variable occurs once");
            }
            Expr::Product(fs) => {
                let (inner, rest): (Vec<Expr>, Vec<Expr>) =
                    fs.into_iter().partition(|t| t.contains_var(v));
                let coeff = Expr::product(rest);
                if is_pos(&coeff, bounds) {
                    other = other / coeff;
                } else if is_pos(&-coeff.clone(), bounds) {
                    other = other / coeff;
                    rel = rel.flip();
                } else {
                    return Vec::new();
                }
                side = inner.into_iter().next().expect("variable occurs once");
            }
            Expr::Power(b, q) => {
                if !is_nonneg(&b, bounds) || !is_nonneg(&other, bounds) {
                    return Vec::new();
                }
                if q.is_negative() {
                    if !is_pos(&b, bounds) || !is_pos(&other, bounds) {
                        return Vec::new();
                    }
                    rel = rel.flip();
                }
                other = other.pow(q.recip());
                side = *b;
            }
            Expr::Log(a) => {
                other = other.exp();
                side = *a;
            }
            Expr::Exp(a) => {
                if !is_pos(&other, bounds) {
                    return Vec::new();
                }
                other = other.ln();
                side = *a;
            }
            _ => return Vec::new(),
        }
    }
}

/// Convenience: `lhs rel rhs` parsed from canonical s-expressions.
pub fn constraint(lhs: &str, rel: Rel, rhs: &str) -> Constraint {
    Constraint::new(
        lhs.parse().expect("valid s-expression"),
        rel,
        rhs.parse().expect("valid s-expression"),
    )
}

/// `v >= c` for an integer constant.
pub fn lower(v: &str, c: i64) -> Constraint {
    Constraint::new(Expr::var(v), Rel::Ge, Expr::Const(int(c)))
}
