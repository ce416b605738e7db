//! Counterexample search for `f <= C g` (or a series bound) at a fixed `C`.
//!
//! Seeded region samples are scored by floating-point evaluation, the best
//! ones are improved by coordinate ascent with growing multiplicative steps,
//! and a candidate is reported only after interval evaluation at the point
//! certifies both region membership and the violation.

use crate::expr::{format_rational, Assignment, Expr, Rational};
use crate::interval::{Interval, Tape};
use crate::problem::{InequalityProblem, Problem, SeriesProblem};
use crate::region::{Region, VarRole};
use crate::sampling::{sample_region, DEFAULT_SEED};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug)]
pub struct FalsifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub ascent_rounds: usize,
    /// Terms summed when screening series samples.
    pub screen_terms: u64,
    /// Terms summed when certifying a series counterexample.
    pub verify_terms: u64,
}

impl Default for FalsifyConfig {
    fn default() -> Self {
        FalsifyConfig {
            samples: 2048,
            seed: DEFAULT_SEED,
            ascent_rounds: 80,
            screen_terms: 2_000,
            verify_terms: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub point: Assignment,
    #[serde(with = "crate::expr::rational_str")]
    pub c: Rational,
    /// Certified lower bound of the left side at the point.
    pub lhs: f64,
    /// Certified upper bound of `C` times the right side.
    pub rhs: f64,
    /// Number of series terms summed, for series problems.
    pub terms: Option<u64>,
}

impl std::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let at: Vec<String> = self.point.iter().map(|(v, x)| format!("{v} = {x}")).collect();
        write!(
            f,
            "at {}: lhs >= {:e} > {:e} >= {} * rhs",
            at.join(", "),
            self.lhs,
            self.rhs,
            format_rational(&self.c)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FalsifyOutcome {
    Found { counterexample: Counterexample },
    NotFound { samples: usize },
}

/// Searches for a point where the claim fails at constant `c`.
pub fn falsify(p: &Problem, c: &Rational, cfg: &FalsifyConfig) -> FalsifyOutcome {
    match p {
        Problem::Inequality(q) => Inequality::new(q, c).search(cfg),
        Problem::Series(s) => Series::new(s, c).search(cfg),
    }
}

trait Objective {
    fn region(&self) -> &Region;
    /// Positive exactly when the point looks like a violation.
    fn score(&self, a: &Assignment, terms: u64) -> Option<f64>;
    fn certify(&self, a: &Assignment, terms: u64) -> Option<Counterexample>;

    fn search(&self, cfg: &FalsifyConfig) -> FalsifyOutcome {
        let r = self.region();
        let pts = sample_region(r, cfg.samples, cfg.seed);
        let mut scored: Vec<(f64, Assignment)> = pts
            .into_iter()
            .filter_map(|a| self.score(&a, cfg.screen_terms).map(|s| (s, a)))
            .collect();
        let n = scored.len();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        for (_, start) in scored.into_iter().take(8) {
            let best = self.ascend(start, cfg);
            if let Some(cx) = self.certify(&best, cfg.verify_terms) {
                return FalsifyOutcome::Found { counterexample: cx };
            }
        }
        FalsifyOutcome::NotFound { samples: n }
    }

    fn ascend(&self, mut a: Assignment, cfg: &FalsifyConfig) -> Assignment {
        let r = self.region();
        let hull = r.bounds();
        let Some(mut best) = self.score(&a, cfg.screen_terms) else {
            return a;
        };
        let mut steps: Vec<f64> = vec![1.0; r.vars.len()];
        for _ in 0..cfg.ascent_rounds {
            if best > 0.0 {
                break;
            }
            let mut improved = false;
            for (k, d) in r.vars.iter().enumerate() {
                let x = a[&d.name];
                let iv = hull.get(&d.name).copied().unwrap_or(Interval::ENTIRE);
                let base = if iv.lo.is_finite() { iv.lo } else { 0.0 };
                let dist = (x - base).abs().max(1e-3);
                let factor = 2f64.powf(steps[k]);
                let mut moved = false;
                for cand in [base + dist * factor, base + dist / factor] {
                    let mut c = cand.clamp(iv.lo, iv.hi);
                    if d.role == VarRole::Index {
                        c = c.round();
                    }
                    if !c.is_finite() || c == x {
                        continue;
                    }
                    let mut b = a.clone();
                    b.insert(d.name.clone(), c);
                    if !r.contains(&b) {
                        continue;
                    }
                    if let Some(s) = self.score(&b, cfg.screen_terms) {
                        if s > best {
                            best = s;
                            a = b;
                            moved = true;
                            break;
                        }
                    }
                }
                if moved {
                    improved = true;
                    steps[k] = (steps[k] * 2.0).min(64.0);
                } else {
                    steps[k] = (steps[k] / 2.0).max(1.0 / 64.0);
                }
            }
            if !improved && steps.iter().all(|s| *s <= 1.0 / 64.0) {
                break;
            }
        }
        a
    }
}

fn point_box(vars: &[String], a: &Assignment) -> Option<Vec<Interval>> {
    vars.iter()
        .map(|v| a.get(v).map(|x| Interval::point(*x)))
        .collect()
}

fn inside(r: &Region, a: &Assignment) -> bool {
    let b: crate::interval::BoxBounds = a.iter().map(|(k, v)| (k.clone(), Interval::point(*v))).collect();
    r.constraints.iter().all(|c| c.decide_on(&b) == Some(true))
}

struct Inequality<'a> {
    region: &'a Region,
    vars: Vec<String>,
    f: Tape,
    cg: Tape,
    c: Rational,
}

impl<'a> Inequality<'a> {
    fn new(q: &'a InequalityProblem, c: &Rational) -> Self {
        let vars = q.region.var_names();
        Inequality {
            region: &q.region,
            f: Tape::compile(&q.lhs, &vars),
            cg: Tape::compile(&q.rhs.clone().scale(c.clone()), &vars),
            vars,
            c: c.clone(),
        }
    }

    fn xs(&self, a: &Assignment) -> Vec<f64> {
        self.vars.iter().map(|v| a[v]).collect()
    }
}

impl Objective for Inequality<'_> {
    fn region(&self) -> &Region {
        self.region
    }

    fn score(&self, a: &Assignment, _terms: u64) -> Option<f64> {
        let x = self.xs(a);
        let f = self.f.eval_f64(&x)?;
        let g = self.cg.eval_f64(&x)?;
        if !f.is_finite() || !g.is_finite() {
            return None;
        }
        Some((f - g) / (f.abs() + g.abs() + f64::MIN_POSITIVE))
    }

    fn certify(&self, a: &Assignment, _terms: u64) -> Option<Counterexample> {
        if !inside(self.region, a) {
            return None;
        }
        let b = point_box(&self.vars, a)?;
        let f = self.f.eval_interval(&b).ok()?;
        let g = self.cg.eval_interval(&b).ok()?;
        (f.lo > g.hi).then(|| Counterexample {
            point: a.clone(),
            c: self.c.clone(),
            lhs: f.lo,
            rhs: g.hi,
            terms: None,
        })
    }
}

struct Series<'a> {
    region: &'a Region,
    vars: Vec<String>,
    summand: Tape,
    ct: Tape,
    start: i64,
    c: Rational,
}

impl<'a> Series<'a> {
    fn new(s: &'a SeriesProblem, c: &Rational) -> Self {
        let mut vars = vec![s.index.clone()];
        vars.extend(s.params_region.var_names());
        let target: Expr = s.target.clone().scale(c.clone());
        Series {
            region: &s.params_region,
            summand: Tape::compile(&s.summand, &vars),
            ct: Tape::compile(&target, &vars),
            vars,
            start: s.start,
            c: c.clone(),
        }
    }

    fn xs(&self, a: &Assignment) -> Vec<f64> {
        let mut x = vec![self.start as f64];
        x.extend(self.vars[1..].iter().map(|v| a[v]));
        x
    }
}

impl Objective for Series<'_> {
    fn region(&self) -> &Region {
        self.region
    }

    fn score(&self, a: &Assignment, terms: u64) -> Option<f64> {
        let mut x = self.xs(a);
        let t = self.ct.eval_f64(&x)?;
        let mut s = 0.0;
        for k in 0..terms {
            x[0] = (self.start + k as i64) as f64;
            s += self.summand.eval_f64(&x)?;
        }
        if !s.is_finite() || !t.is_finite() {
            return None;
        }
        Some((s - t) / (s.abs() + t.abs() + f64::MIN_POSITIVE))
    }

    fn certify(&self, a: &Assignment, terms: u64) -> Option<Counterexample> {
        if !inside(self.region, a) {
            return None;
        }
        let mut b = point_box(&self.vars[1..], a)?;
        b.insert(0, Interval::point(self.start as f64));
        let t = self.ct.eval_interval(&b).ok()?;
        let mut s = Interval::point(0.0);
        for k in 0..terms {
            b[0] = Interval::point((self.start + k as i64) as f64);
            s = s.add(self.summand.eval_interval(&b).ok()?);
            if s.lo > t.hi {
                return Some(Counterexample {
                    point: a.clone(),
                    c: self.c.clone(),
                    lhs: s.lo,
                    rhs: t.hi,
                    terms: Some(k + 1),
                });
            }
        }
        None
    }
}
