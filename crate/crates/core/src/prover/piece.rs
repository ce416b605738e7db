//! Certification of `f <= C g` on one region.
//!
//! The claim is reduced to residuals `h >= 0` handed to the branch-and-bound
//! engine. Residuals come from three sources:
//!
//! * the exact form `C g - f`, optionally divided by a positive term of `g`;
//! * relaxed forms, where a variable is eliminated by replacing it with one
//!   of its region bounds in `f` (upper side) and `g` (lower side) according
//!   to certified monotonicity, dropping its constraints;
//! * homogeneous slices: on a cone, a claim of matching degrees holds iff it
//!   holds on the slices `v = 1` and `v = 0`.

use super::bnb::{prove_nonneg, BnbConfig, BnbOutcome};
use super::{Certificate, PieceOutcome, ProverError};
use crate::expr::{
    expand, format_rational, int, monotonicity_on, normalize, rat, simplify_positive,
    substitute, Expr, Monotonicity, Rational,
};
use crate::interval::{eval_expr, is_pos, BoxBounds, Interval, Tape};
use crate::region::{Constraint, Region, Rel};
use crate::simplify::{JustificationStep, Rule, StepRelation};
use std::collections::BTreeSet;
use num_traits::Signed;

/// Work limits for one `prove_piece` call.
#[derive(Clone, Copy, Debug)]
pub struct PieceConfig {
    pub box_budget: usize,
    pub deriv_depth: u32,
    pub max_claims: usize,
}

impl Default for PieceConfig {
    fn default() -> Self {
        PieceConfig {
            box_budget: 100_000,
            deriv_depth: 2,
            max_claims: 16,
        }
    }
}

/// Fresh scaling variable for homogeneity checks; not a legal user name.
const SCALE: &str = "__t";

const PASSES: [usize; 2] = [256, 4096];

#[derive(Clone, Debug)]
struct Part {
    f: Expr,
    g: Expr,
    region: Region,
}

#[derive(Clone, Debug)]
struct Claim {
    parts: Vec<Part>,
    route: String,
    steps: Vec<JustificationStep>,
    /// A violation of an exact claim refutes the constant.
    exact: bool,
}

/// Claims derived once per `(f, g, region)` and reused for every constant.
#[derive(Clone, Debug)]
pub struct PieceContext {
    claims: Vec<Claim>,
    cfg: PieceConfig,
}

/// Result of one constant: the outcome plus whether the constant was refuted
/// outright.
pub(crate) struct Attempt {
    pub outcome: PieceOutcome,
    pub refuted: bool,
}

/// Proves `f <= C g` on `r` with the default budget.
pub fn prove_piece(f: &Expr, g: &Expr, r: &Region, c: &Rational) -> Result<PieceOutcome, ProverError> {
    prove_piece_with(f, g, r, c, &PieceConfig::default())
}

pub fn prove_piece_with(
    f: &Expr,
    g: &Expr,
    r: &Region,
    c: &Rational,
    cfg: &PieceConfig,
) -> Result<PieceOutcome, ProverError> {
    let ctx = PieceContext::new(f, g, r, cfg)?;
    Ok(ctx.attempt(c, cfg.box_budget).outcome)
}

impl PieceContext {
    pub fn new(f: &Expr, g: &Expr, r: &Region, cfg: &PieceConfig) -> Result<PieceContext, ProverError> {
        let f = normalize(f);
        let g = normalize(g);
        for (name, e) in [("f", &f), ("g", &g)] {
            if !defined_on(e, r, cfg.box_budget.min(4096)) {
                return Err(ProverError::Domain(format!(
                    "{name} = {e} is not certified defined on {r}"
                )));
            }
        }
        let exact = Claim {
            parts: vec![Part {
                f: f.clone(),
                g: g.clone(),
                region: r.clone(),
            }],
            route: "exact".into(),
            steps: Vec::new(),
            exact: true,
        };
        let mut claims = vec![exact.clone()];
        let mut seen: BTreeSet<String> = BTreeSet::new();
        seen.insert(key(&exact.parts[0]));
        eliminations(&exact, &mut claims, &mut seen, cfg.max_claims);
        let base = claims.clone();
        for cl in &base {
            if claims.len() >= cfg.max_claims + 4 {
                break;
            }
            if cl.parts.len() == 1 {
                if let Some(parts) = slices(&cl.parts[0], 2) {
                    claims.push(Claim {
                        parts,
                        route: format!("{}; homogeneous slice", cl.route),
                        steps: cl.steps.clone(),
                        exact: cl.exact,
                    });
                }
            }
        }
        // Fully eliminated claims are cheapest; the exact claim goes last
        // among single-part claims.
        claims.sort_by_key(|c| {
            let vars: usize = c.parts.iter().map(|p| p.region.vars.len()).max().unwrap_or(0);
            (vars, c.exact)
        });
        Ok(PieceContext {
            claims,
            cfg: *cfg,
        })
    }

    /// One constant with at most `budget` boxes in total.
    pub(crate) fn attempt(&self, c: &Rational, budget: usize) -> Attempt {
        let mut cands: Vec<(usize, Vec<(Expr, Region)>, String)> = Vec::new();
        for (i, cl) in self.claims.iter().enumerate() {
            for (res, label) in residuals(cl, c) {
                cands.push((i, res, label));
            }
        }
        let mut alive = vec![true; cands.len()];
        let mut remaining = budget;
        let mut used = 0usize;
        let mut last_reason = String::from("no residual certified");
        for pass in 0..=PASSES.len() {
            let n_alive = alive.iter().filter(|a| **a).count();
            if n_alive == 0 || remaining == 0 {
                break;
            }
            let per = if pass < PASSES.len() {
                PASSES[pass]
            } else {
                (remaining / n_alive).max(1)
            };
            for (k, (ci, res, label)) in cands.iter().enumerate() {
                if !alive[k] || remaining == 0 {
                    continue;
                }
                let cl = &self.claims[*ci];
                let mut all = true;
                for (h, region) in res {
                    let b = per.min(remaining);
                    let cfg = BnbConfig {
                        budget: b,
                        deriv_depth: self.cfg.deriv_depth,
                    };
                    let out = prove_nonneg(h, region, &cfg);
                    remaining -= out.boxes().min(remaining);
                    used += out.boxes();
                    match out {
                        BnbOutcome::Proved { .. } => {}
                        BnbOutcome::Violated { point, .. } => {
                            alive[k] = false;
                            all = false;
                            let at: Vec<String> =
                                point.iter().map(|(v, x)| format!("{v}={x}")).collect();
                            if cl.exact {
                                return Attempt {
                                    outcome: PieceOutcome::Unknown(format!(
                                        "C = {} fails at {}",
                                        format_rational(c),
                                        at.join(", ")
                                    )),
                                    refuted: true,
                                };
                            }
                            last_reason = format!("relaxed residual negative at {}", at.join(", "));
                            break;
                        }
                        BnbOutcome::Exhausted { .. } => {
                            all = false;
                            last_reason = format!(
                                "box budget exhausted at C = {}",
                                format_rational(c)
                            );
                            if pass == PASSES.len() {
                                alive[k] = false;
                            }
                            break;
                        }
                    }
                }
                if all {
                    return Attempt {
                        outcome: PieceOutcome::Proved(Certificate {
                            c: c.clone(),
                            route: format!("{}{}", cl.route, label),
                            residuals: res.iter().map(|(h, _)| h.clone()).collect(),
                            steps: cl.steps.clone(),
                            boxes: used,
                        }),
                        refuted: false,
                    };
                }
            }
        }
        Attempt {
            outcome: PieceOutcome::Unknown(last_reason),
            refuted: false,
        }
    }
}

fn key(p: &Part) -> String {
    format!("{}|{}|{}", p.f, p.g, p.region)
}

/// Residual variants of a claim at constant `c`.
fn residuals(cl: &Claim, c: &Rational) -> Vec<(Vec<(Expr, Region)>, String)> {
    let plain: Vec<(Expr, Region)> = cl
        .parts
        .iter()
        .map(|p| (residual(p, c), p.region.clone()))
        .collect();
    let mut out = vec![(plain.clone(), String::new())];
    if cl.parts.len() == 1 {
        let p = &cl.parts[0];
        let hull = p.region.bounds();
        let mut scalers = 0;
        for t in expand(&p.g).terms() {
            if scalers == 2 {
                break;
            }
            if t.free_vars().is_empty() || !is_pos(&t, &hull) {
                continue;
            }
            let inv = normalize(&Expr::Power(Box::new(t.clone()), int(-1)));
            let h = expand(&normalize(&Expr::Product(vec![plain[0].0.clone(), inv])));
            out.push((
                vec![(h, p.region.clone())],
                format!("; divided by {t}"),
            ));
            scalers += 1;
        }
        if let Some(h) = clear_denominators(&plain[0].0, &hull) {
            out.push((vec![(h, p.region.clone())], "; denominators cleared".into()));
        }
    }
    out
}

/// `h` times the product of its positive denominators, so that decaying
/// differences such as `1/x - 1/(1 + x)` become polynomial in the tail.
fn clear_denominators(h: &Expr, hull: &BoxBounds) -> Option<Expr> {
    let mut dens: Vec<(Expr, Rational)> = Vec::new();
    for t in h.terms() {
        for f in t.factors() {
            let Expr::Power(b, q) = &f else { continue };
            if !q.is_negative() {
                continue;
            }
            let q = -q.clone();
            match dens.iter_mut().find(|(d, _)| d == b.as_ref()) {
                Some((_, m)) if *m < q => *m = q,
                Some(_) => {}
                None => dens.push((b.as_ref().clone(), q)),
            }
        }
    }
    if dens.is_empty() || !dens.iter().all(|(b, _)| is_pos(b, hull)) {
        return None;
    }
    let dens: Vec<Expr> = dens.into_iter().map(|(b, q)| Expr::Power(Box::new(b), q)).collect();
    // Per term, so that each denominator cancels before expansion.
    let terms = h.terms().into_iter().map(|t| {
        let mut fs = vec![t];
        fs.extend(dens.iter().cloned());
        normalize(&Expr::Product(fs))
    });
    let out = expand(&normalize(&Expr::Sum(terms.collect())));
    (out != *h).then_some(out)
}

fn residual(p: &Part, c: &Rational) -> Expr {
    expand(&(p.g.clone().scale(c.clone()) - p.f.clone()))
}

/// Relaxed claims from every elimination order.
fn eliminations(base: &Claim, out: &mut Vec<Claim>, seen: &mut BTreeSet<String>, cap: usize) {
    let mut frontier = vec![base.clone()];
    while let Some(cl) = frontier.pop() {
        let p = &cl.parts[0];
        for v in p.region.var_names() {
            if out.len() >= cap {
                return;
            }
            if !p.f.contains_var(&v) && !p.g.contains_var(&v) {
                continue;
            }
            for (np, steps) in eliminate(p, &v) {
                let k = key(&np);
                if !seen.insert(k) {
                    continue;
                }
                let mut all_steps = cl.steps.clone();
                all_steps.extend(steps);
                let route = if cl.exact {
                    format!("eliminate {v}")
                } else {
                    format!("{}, {v}", cl.route)
                };
                let next = Claim {
                    parts: vec![np],
                    route,
                    steps: all_steps,
                    exact: false,
                };
                out.push(next.clone());
                frontier.push(next);
            }
        }
    }
}

/// Replaces `v` by region bounds so that `f` can only grow and `g` can only
/// shrink.
fn eliminate(p: &Part, v: &str) -> Vec<(Part, Vec<JustificationStep>)> {
    let hull = p.region.bounds();
    let mut uppers: Vec<Expr> = Vec::new();
    let mut lowers: Vec<Expr> = Vec::new();
    for vb in p.region.bounds_for(v) {
        if vb.expr.contains_var(v) {
            continue;
        }
        if vb.rel.is_upper() || vb.rel == Rel::Eq {
            push_unique(&mut uppers, vb.expr.clone());
        }
        if vb.rel.is_lower() || vb.rel == Rel::Eq {
            push_unique(&mut lowers, vb.expr.clone());
        }
    }
    let h = hull.get(v).copied().unwrap_or(Interval::ENTIRE);
    if let Some(c) = finite_const(h.hi) {
        push_unique(&mut uppers, c);
    }
    if let Some(c) = finite_const(h.lo) {
        push_unique(&mut lowers, c);
    }
    let f_choices = side_choices(&p.f, v, &hull, &uppers, &lowers, true);
    let g_choices = side_choices(&p.g, v, &hull, &uppers, &lowers, false);
    let region = p.region.eliminate(v);
    let rb = region.bounds();
    let mut out = Vec::new();
    for (fe, fstep) in &f_choices {
        for (ge, gstep) in &g_choices {
            if out.len() >= 4 {
                return out;
            }
            let np = Part {
                f: simplify_positive(fe, &rb),
                g: simplify_positive(ge, &rb),
                region: region.clone(),
            };
            let steps: Vec<JustificationStep> =
                fstep.iter().chain(gstep.iter()).cloned().collect();
            out.push((np, steps));
        }
    }
    out
}

fn push_unique(v: &mut Vec<Expr>, e: Expr) {
    if !v.contains(&e) {
        v.push(e);
    }
}

fn finite_const(x: f64) -> Option<Expr> {
    if !x.is_finite() {
        return None;
    }
    crate::expr::rational_from_f64(x).map(Expr::Const)
}

/// Ways to bound `e` from above (`upper`) or below after removing `v`.
fn side_choices(
    e: &Expr,
    v: &str,
    hull: &BoxBounds,
    uppers: &[Expr],
    lowers: &[Expr],
    upper: bool,
) -> Vec<(Expr, Option<JustificationStep>)> {
    if !e.contains_var(v) {
        return vec![(e.clone(), None)];
    }
    let mut out = Vec::new();
    for (bound, is_up) in uppers
        .iter()
        .map(|b| (b, true))
        .chain(lowers.iter().map(|b| (b, false)))
    {
        // The segment between v and its bound stays inside the extended box.
        let mut ext = hull.clone();
        let cur = ext.get(v).copied().unwrap_or(Interval::ENTIRE);
        let Ok(bi) = eval_expr(bound, hull) else {
            continue;
        };
        ext.insert(v.to_string(), cur.hull(&bi));
        let m = monotonicity_on(e, v, &ext);
        // Upper bound of e: increasing e wants v's upper bound.
        let wanted = match (m, upper) {
            (Monotonicity::Increasing, true) | (Monotonicity::Decreasing, false) => true,
            (Monotonicity::Decreasing, true) | (Monotonicity::Increasing, false) => false,
            (Monotonicity::Unknown, _) => continue,
        };
        if wanted != is_up {
            continue;
        }
        let after = normalize(&substitute(e, v, bound));
        let premise = Constraint::new(
            Expr::var(v),
            if is_up { Rel::Le } else { Rel::Ge },
            bound.clone(),
        );
        let step = JustificationStep {
            rule: Rule::MonotoneSubstitution,
            premises: vec![premise],
            before: e.clone(),
            after: after.clone(),
            relation: if upper {
                StepRelation::AtMost { factor: int(1) }
            } else {
                StepRelation::AtLeast
            },
        };
        out.push((after, Some(step)));
    }
    out
}

/// Degree `k` with `e(t x) = t^k e(x)` for `t > 0` on the hull, if any.
fn homogeneous_degree(e: &Expr, vars: &[String], hull: &BoxBounds) -> Option<Rational> {
    let t = Expr::var(SCALE);
    let mut et = e.clone();
    for v in vars {
        et = substitute(&et, v, &(t.clone() * Expr::var(v)));
    }
    let mut hb = hull.clone();
    hb.insert(SCALE.into(), Interval::new(f64::MIN_POSITIVE, f64::INFINITY));
    let lhs = expand(&simplify_positive(&et, &hb));
    let degrees = [
        int(1),
        int(2),
        rat(1, 2),
        rat(1, 3),
        rat(2, 3),
        int(3),
        rat(3, 2),
        int(4),
        int(0),
        int(-1),
        int(-2),
        rat(-1, 2),
    ];
    degrees.into_iter().find(|k| {
        let rhs = expand(&simplify_positive(&(t.clone().pow(k.clone()) * e.clone()), &hb));
        rhs == lhs
    })
}

/// Slices of a claim on a nonnegative cone, recursing into the `v = 0` face.
fn slices(p: &Part, depth: u32) -> Option<Vec<Part>> {
    let vars = p.region.var_names();
    if vars.len() < 2 || depth == 0 {
        return None;
    }
    let hull = p.region.bounds();
    if !vars
        .iter()
        .all(|v| hull.get(v).is_some_and(|iv| iv.lo >= 0.0))
    {
        return None;
    }
    for c in &p.region.constraints {
        homogeneous_degree(&c.difference(), &vars, &hull)?;
    }
    let kf = if p.f.is_zero() { None } else { Some(homogeneous_degree(&p.f, &vars, &hull)?) };
    let kg = if p.g.is_zero() { None } else { Some(homogeneous_degree(&p.g, &vars, &hull)?) };
    if let (Some(a), Some(b)) = (&kf, &kg) {
        if a != b {
            return None;
        }
    }
    for v in &vars {
        let one = Expr::one();
        let r1 = p.region.substitute(v, &one);
        let b1 = r1.bounds();
        if !r1.var_names().iter().all(|w| b1.get(w).is_some_and(|iv| iv.is_bounded())) {
            continue;
        }
        let at = |e: &Expr, val: &Expr, r: &Region| simplify_positive(&normalize(&substitute(e, v, val)), &r.bounds());
        let zero = Expr::zero();
        let r0 = p.region.substitute(v, &zero);
        let top = Part {
            f: at(&p.f, &one, &r1),
            g: at(&p.g, &one, &r1),
            region: r1,
        };
        let face = Part {
            f: at(&p.f, &zero, &r0),
            g: at(&p.g, &zero, &r0),
            region: r0,
        };
        let mut parts = vec![top];
        match slices(&face, depth - 1) {
            Some(more) => parts.extend(more),
            None => parts.push(face),
        }
        return Some(parts);
    }
    None
}

/// Certifies that `e` evaluates without domain errors on the region.
pub(crate) fn defined_on(e: &Expr, r: &Region, budget: usize) -> bool {
    let vars = {
        let mut v = r.var_names();
        for x in e.free_vars() {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        v
    };
    let tape = Tape::compile(e, &vars);
    let hull = r.bounds();
    let root: Vec<Interval> = vars
        .iter()
        .map(|v| hull.get(v).copied().unwrap_or(Interval::ENTIRE))
        .collect();
    if tape.eval_interval(&root).is_ok() {
        return true;
    }
    let cons: Vec<(Rel, Tape)> = r
        .constraints
        .iter()
        .map(|c| (c.rel, Tape::compile(&c.difference(), &vars)))
        .collect();
    let mut stack = vec![root];
    let mut boxes = 0;
    while let Some(b) = stack.pop() {
        boxes += 1;
        if boxes > budget {
            return false;
        }
        let infeasible = cons.iter().any(|(rel, t)| {
            t.eval_interval(&b)
                .ok()
                .and_then(|d| super::bnb::decide_rel(*rel, d))
                == Some(false)
        });
        if infeasible || tape.eval_interval(&b).is_ok() {
            continue;
        }
        let Some((k, at)) = widest(&b) else {
            return false;
        };
        let mut l = b.clone();
        let mut rr = b;
        l[k].hi = at;
        rr[k].lo = at;
        stack.push(rr);
        stack.push(l);
    }
    true
}

fn widest(b: &[Interval]) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for (k, iv) in b.iter().enumerate() {
        if let Some((score, at)) = super::bnb::split_point(iv) {
            if best.map_or(true, |(s, _, _)| score > s) {
                best = Some((score, k, at));
            }
        }
    }
    best.map(|(_, k, at)| (k, at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{constraint, lower};

    fn e(s: &str) -> Expr {
        normalize(&s.parse().unwrap())
    }

    fn fy_region(rel: Rel) -> Region {
        Region::reals(
            &["x", "y"],
            vec![
                lower("x", 1),
                lower("y", 0),
                constraint("y", rel, "(* 2 (log x))"),
            ],
        )
    }

    fn proved(o: &PieceOutcome) -> bool {
        matches!(o, PieceOutcome::Proved(_))
    }

    #[test]
    fn fenchel_young_pieces() {
        let f = e("(* x y)");
        let g = e("(+ (* x (log x)) (exp y))");
        let low = fy_region(Rel::Le);
        let high = fy_region(Rel::Gt);
        assert!(proved(&prove_piece(&f, &g, &low, &int(2)).unwrap()));
        assert!(proved(&prove_piece(&f, &g, &high, &int(1)).unwrap()));
    }

    #[test]
    fn false_constant_is_refuted() {
        let r = Region::reals(&["x"], vec![lower("x", 1)]);
        let ctx = PieceContext::new(&e("(^ x 2)"), &e("x"), &r, &PieceConfig::default()).unwrap();
        let a = ctx.attempt(&int(4), 100_000);
        assert!(a.refuted);
    }

    #[test]
    fn ordering_piece_of_am_gm() {
        let r = Region::reals(
            &["x", "y", "z"],
            vec![
                lower("x", 0),
                constraint("x", Rel::Le, "y"),
                constraint("y", Rel::Le, "z"),
            ],
        );
        let f = e("(^ (* x y z) 1/3)");
        let g = e("(* 1/3 (+ x y z))");
        let out = prove_piece(&f, &g, &r, &int(2)).unwrap();
        assert!(proved(&out), "{out:?}");
    }

    #[test]
    fn domain_error_for_undefined_log() {
        let r = Region::reals(&["x"], vec![lower("x", 0)]);
        let err = prove_piece(&e("(log x)"), &e("x"), &r, &int(1)).unwrap_err();
        assert!(matches!(err, ProverError::Domain(_)));
    }

    #[test]
    fn homogeneity_detects_degree() {
        let hull: BoxBounds = [("x".to_string(), Interval::new(0.0, f64::INFINITY)), ("y".to_string(), Interval::new(0.0, f64::INFINITY))]
            .into_iter()
            .collect();
        let vars = vec!["x".to_string(), "y".to_string()];
        assert_eq!(homogeneous_degree(&e("(^ (* x y) 1/2)"), &vars, &hull), Some(int(1)));
        assert_eq!(homogeneous_degree(&e("(+ x (log y))"), &vars, &hull), None);
    }

    #[test]
    fn decaying_difference_needs_cleared_denominators() {
        let r = Region::reals(&["x"], vec![crate::region::lower("x", 1)]);
        let h = normalize(&e("(+ (^ x -1) (* -1 (^ (+ 1 x) -1)))"));
        assert_eq!(clear_denominators(&expand(&h), &r.bounds()), Some(Expr::Const(int(1))));
        let o = prove_piece(&e("(^ (+ 1 x) -1)"), &e("(^ x -1)"), &r, &int(1)).unwrap();
        assert!(proved(&o), "{o:?}");
    }
}
