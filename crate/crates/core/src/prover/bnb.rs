//! Interval branch-and-bound certification of `h >= 0` on a region.
//!
//! Boxes are contracted with the region constraints, then tested by interval
//! evaluation of `h` and of its factored form. When that is inconclusive,
//! a variable in which `h` is certifiably monotone on the box is fixed to
//! the minimizing endpoint; derivative signs are themselves certified the
//! same way up to a fixed depth. Remaining boxes are split, unbounded ones
//! geometrically.
//!
//! A box that has a variable fixed by monotone reduction is a superset
//! argument: the minimum over the whole box is attained on the reduced face,
//! so constraints are not consulted inside [`Search::certify`].

use crate::expr::{
    differentiate, evaluate_exact, factor_common_deep, rational_from_f64, Assignment, Expr,
    Rational,
};
use crate::interval::{Interval, Tape};
use crate::region::{isolate, Region, Rel};
use num_traits::Signed;
use std::cell::OnceCell;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct BnbConfig {
    /// Maximum number of boxes processed.
    pub budget: usize,
    /// Derivative nesting used by monotone reduction.
    pub deriv_depth: u32,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            budget: 100_000,
            deriv_depth: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BnbOutcome {
    Proved { boxes: usize },
    /// A region point where `h < 0`, certified by interval evaluation.
    Violated { point: Assignment, boxes: usize },
    Exhausted { boxes: usize },
}

impl BnbOutcome {
    pub fn boxes(&self) -> usize {
        match self {
            BnbOutcome::Proved { boxes }
            | BnbOutcome::Violated { boxes, .. }
            | BnbOutcome::Exhausted { boxes } => *boxes,
        }
    }
}

/// A compiled expression with lazily built derivatives.
struct Node {
    expr: Expr,
    tape: Tape,
    factors: Vec<Tape>,
    /// Slots of the variables that occur in `expr`.
    slots: Vec<usize>,
    derivs: Vec<OnceCell<Box<Node>>>,
}

impl Node {
    fn new(expr: Expr, vars: &[String]) -> Node {
        let tape = Tape::compile(&expr, vars);
        let fac = factor_common_deep(&expr);
        let factors = fac.factors().iter().map(|f| Tape::compile(f, vars)).collect();
        let fv = expr.free_vars();
        let slots = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| fv.contains(*v))
            .map(|(i, _)| i)
            .collect();
        Node {
            expr,
            tape,
            factors,
            slots,
            derivs: (0..vars.len()).map(|_| OnceCell::new()).collect(),
        }
    }

    fn deriv(&self, k: usize, vars: &[String]) -> &Node {
        self.derivs[k].get_or_init(|| Box::new(Node::new(differentiate(&self.expr, &vars[k]), vars)))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cert {
    Yes,
    Unknown,
}

struct CompiledConstraint {
    rel: Rel,
    diff: Tape,
    /// `(slot, relation, bound)` from isolating each singly occurring variable.
    bounds: Vec<(usize, Rel, Tape)>,
}

struct Search {
    vars: Vec<String>,
    root: Node,
    constraints: Vec<CompiledConstraint>,
    depth: u32,
}

/// Certifies `h >= 0` on `region` within the configured budget.
pub fn prove_nonneg(h: &Expr, region: &Region, cfg: &BnbConfig) -> BnbOutcome {
    let mut vars = region.var_names();
    for v in h.free_vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let hull = region.bounds();
    let b: Vec<Interval> = vars
        .iter()
        .map(|v| hull.get(v).copied().unwrap_or(Interval::ENTIRE))
        .collect();
    let mut constraints = Vec::new();
    for c in &region.constraints {
        let mut bounds = Vec::new();
        for (k, v) in vars.iter().enumerate() {
            if !c.mentions(v) {
                continue;
            }
            for vb in isolate(c, v, &hull) {
                bounds.push((k, vb.rel, Tape::compile(&vb.expr, &vars)));
            }
        }
        constraints.push(CompiledConstraint {
            rel: c.rel,
            diff: Tape::compile(&c.difference(), &vars),
            bounds,
        });
    }
    let s = Search {
        root: Node::new(h.clone(), &vars),
        vars,
        constraints,
        depth: cfg.deriv_depth,
    };
    s.run(b, cfg.budget)
}

pub(crate) fn decide_rel(rel: Rel, d: Interval) -> Option<bool> {
    match rel {
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

impl Search {
    fn run(&self, root: Vec<Interval>, budget: usize) -> BnbOutcome {
        let mut stack = vec![root];
        let mut boxes = 0usize;
        while let Some(mut b) = stack.pop() {
            if boxes >= budget {
                return BnbOutcome::Exhausted { boxes };
            }
            boxes += 1;
            if !self.contract(&mut b) {
                continue;
            }
            if self.certify(&self.root, &b, true, self.depth) == Cert::Yes {
                continue;
            }
            if let Some(point) = self.violation(&b) {
                return BnbOutcome::Violated { point, boxes };
            }
            match self.split(&b) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => return BnbOutcome::Exhausted { boxes },
            }
        }
        BnbOutcome::Proved { boxes }
    }

    /// Shrinks the box to the hull of its intersection with the active
    /// constraints; `false` if that intersection is empty.
    fn contract(&self, b: &mut [Interval]) -> bool {
        for _ in 0..2 {
            for c in &self.constraints {
                if let Ok(d) = c.diff.eval_interval(b) {
                    if decide_rel(c.rel, d) == Some(false) {
                        return false;
                    }
                }
                for (k, rel, t) in &c.bounds {
                    let Ok(iv) = t.eval_interval(b) else {
                        continue;
                    };
                    let cur = &mut b[*k];
                    match rel {
                        Rel::Le | Rel::Lt => cur.hi = cur.hi.min(iv.hi),
                        Rel::Ge | Rel::Gt => cur.lo = cur.lo.max(iv.lo),
                        Rel::Eq => {
                            cur.lo = cur.lo.max(iv.lo);
                            cur.hi = cur.hi.min(iv.hi);
                        }
                    }
                    if cur.lo > cur.hi || cur.lo.is_nan() || cur.hi.is_nan() {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Certifies `node >= 0` (or `<= 0`) on the whole box.
    fn certify(&self, node: &Node, b: &[Interval], nonneg: bool, depth: u32) -> Cert {
        if let Ok(iv) = node.tape.eval_interval(b) {
            if (nonneg && iv.lo >= 0.0) || (!nonneg && iv.hi <= 0.0) {
                return Cert::Yes;
            }
        }
        if node.factors.len() > 1 {
            let mut neg = false;
            let mut known = true;
            for f in &node.factors {
                match f.eval_interval(b) {
                    Ok(iv) if iv.lo >= 0.0 => {}
                    Ok(iv) if iv.hi <= 0.0 => neg = !neg,
                    _ => {
                        known = false;
                        break;
                    }
                }
            }
            if known && neg != nonneg {
                return Cert::Yes;
            }
        }
        if node.slots.iter().all(|&k| b[k].is_point()) {
            return self.exact_sign(node, b, nonneg);
        }
        if depth == 0 {
            return Cert::Unknown;
        }
        let mut order: Vec<usize> = node
            .slots
            .iter()
            .copied()
            .filter(|&k| !b[k].is_point())
            .collect();
        order.sort_by_key(|&k| b[k].is_bounded());
        for k in order {
            let d = node.deriv(k, &self.vars);
            let inc = self.certify(d, b, true, depth - 1) == Cert::Yes;
            let dec = !inc && self.certify(d, b, false, depth - 1) == Cert::Yes;
            let at = match (inc, dec, nonneg) {
                (true, _, true) | (_, true, false) => b[k].lo,
                (true, _, false) | (_, true, true) => b[k].hi,
                _ => continue,
            };
            if !at.is_finite() {
                continue;
            }
            let mut r = b.to_vec();
            r[k] = Interval::point(at);
            return self.certify(node, &r, nonneg, depth);
        }
        Cert::Unknown
    }

    fn exact_sign(&self, node: &Node, b: &[Interval], nonneg: bool) -> Cert {
        let mut a: BTreeMap<String, Rational> = BTreeMap::new();
        for &k in &node.slots {
            match rational_from_f64(b[k].lo) {
                Some(r) => {
                    a.insert(self.vars[k].clone(), r);
                }
                None => return Cert::Unknown,
            }
        }
        match evaluate_exact(&node.expr, &a) {
            Some(Ok(v)) if (nonneg && !v.is_negative()) || (!nonneg && !v.is_positive()) => {
                Cert::Yes
            }
            _ => Cert::Unknown,
        }
    }

    /// A region point in the box where `h < 0` is certified.
    fn violation(&self, b: &[Interval]) -> Option<Assignment> {
        let mid: Vec<f64> = b.iter().map(representative).collect();
        let low: Vec<f64> = b
            .iter()
            .map(|iv| if iv.lo.is_finite() { iv.lo } else { representative(iv) })
            .collect();
        for p in [mid, low] {
            if p.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let pb: Vec<Interval> = p.iter().map(|&x| Interval::point(x)).collect();
            let inside = self.constraints.iter().all(|c| {
                c.diff
                    .eval_interval(&pb)
                    .ok()
                    .and_then(|d| decide_rel(c.rel, d))
                    == Some(true)
            });
            if !inside {
                continue;
            }
            let negative = match self.root.tape.eval_interval(&pb) {
                Ok(iv) => iv.hi < 0.0,
                Err(_) => false,
            } || self.exact_negative(&p);
            if negative {
                return Some(self.vars.iter().cloned().zip(p).collect());
            }
        }
        None
    }

    fn exact_negative(&self, p: &[f64]) -> bool {
        let mut a: BTreeMap<String, Rational> = BTreeMap::new();
        for &k in &self.root.slots {
            match rational_from_f64(p[k]) {
                Some(r) => {
                    a.insert(self.vars[k].clone(), r);
                }
                None => return false,
            }
        }
        matches!(evaluate_exact(&self.root.expr, &a), Some(Ok(v)) if v.is_negative())
    }

    fn split(&self, b: &[Interval]) -> Option<(Vec<Interval>, Vec<Interval>)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, iv) in b.iter().enumerate() {
            if iv.is_point() {
                continue;
            }
            let in_h = self.root.slots.contains(&k);
            let Some((score, at)) = split_point(iv) else {
                continue;
            };
            let score = if in_h { score } else { score * 0.5 };
            if best.map_or(true, |(s, _, _)| score > s) {
                best = Some((score, k, at));
            }
        }
        let (_, k, at) = best?;
        let mut l = b.to_vec();
        let mut r = b.to_vec();
        l[k].hi = at;
        r[k].lo = at;
        Some((l, r))
    }
}

/// A finite point of the interval used for violation probes.
fn representative(iv: &Interval) -> f64 {
    match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, true) => iv.lo + (iv.hi - iv.lo) / 2.0,
        (true, false) => iv.lo.max(0.0) * 2.0 + 1.0,
        (false, true) => iv.hi.min(0.0) * 2.0 - 1.0,
        (false, false) => 0.0,
    }
}

/// Split score and point; `None` when the interval cannot be split further.
pub(crate) fn split_point(iv: &Interval) -> Option<(f64, f64)> {
    let (lo, hi) = (iv.lo, iv.hi);
    let at = match (lo.is_finite(), hi.is_finite()) {
        (false, false) => return Some((f64::INFINITY, 0.0)),
        (true, false) => {
            let m = if lo >= 1.0 {
                lo * 2.0
            } else if lo >= 0.0 {
                lo + 1.0
            } else {
                0.0
            };
            return m.is_finite().then_some((f64::INFINITY, m));
        }
        (false, true) => {
            let m = if hi <= -1.0 {
                hi * 2.0
            } else if hi <= 0.0 {
                hi - 1.0
            } else {
                0.0
            };
            return m.is_finite().then_some((f64::INFINITY, m));
        }
        (true, true) => {
            if lo >= 0.0 && hi > 4.0 * lo.max(1.0) {
                let a = lo.max(1.0);
                return Some(((hi / a).log2() + 1.0, (a * hi).sqrt()));
            }
            if hi <= 0.0 && lo < -4.0 * hi.abs().max(1.0) {
                let a = hi.abs().max(1.0);
                return Some(((lo.abs() / a).log2() + 1.0, -(a * lo.abs()).sqrt()));
            }
            lo + (hi - lo) / 2.0
        }
    };
    if !(at > lo && at < hi) {
        return None;
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let w = (hi - lo) / scale;
    (w > 1e-13).then_some((w, at))
}
