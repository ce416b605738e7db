//! End-to-end runs: propose, check coverage, prove each piece, aggregate,
//! and look for a counterexample when nothing is proved.

use crate::cas::{build_resolve_query, cas_grid_search, run_resolve, CasConfig, CasOutcome, ResolveStatus, DEFAULT_TIMEOUT_SECS};
use crate::decompose::{
    heuristic_propose, llm_propose, validate_cover, CoverageReport, Decomposition, PromptTranscript,
    ProposerConfig, Transport,
};
use crate::expr::{format_rational, Expr, Rational};
use crate::prover::{
    falsify, prove_series_with, Counterexample, FalsifyConfig, FalsifyOutcome, GridOutcome, GridSearch,
    GridSpec, PieceConfig, SegmentProof,
};
use crate::problem::Problem;
use crate::region::Region;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    HeuristicFirst,
    LlmFirst,
    LlmOnly,
    HeuristicOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Builtin,
    Cas,
    Both,
}

impl Backend {
    fn builtin(self) -> bool {
        matches!(self, Backend::Builtin | Backend::Both)
    }

    fn cas(self) -> bool {
        matches!(self, Backend::Cas | Backend::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub strategy: Strategy,
    /// Largest grid constant; the standard grid is truncated (or extended
    /// by this single value) accordingly.
    #[serde(with = "crate::expr::opt_rational_str")]
    pub grid_max: Option<Rational>,
    pub backend: Backend,
    /// Box budget of the full pass per constant.
    pub box_budget: usize,
    /// Box budget of the first pass over every candidate.
    pub quick_budget: usize,
    pub falsify_samples: usize,
    /// Forbids live model calls.
    pub replay: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: Strategy::HeuristicFirst,
            grid_max: None,
            backend: Backend::Builtin,
            box_budget: 100_000,
            quick_budget: 4096,
            falsify_samples: 2048,
            replay: false,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> GridSpec {
        match &self.grid_max {
            Some(m) => GridSpec::up_to(m),
            None => GridSpec::standard(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.box_budget == 0 || self.quick_budget == 0 {
            return Err("budgets must be positive".into());
        }
        if self.grid_max.as_ref().is_some_and(|m| *m <= Rational::from_integer(0.into())) {
            return Err("grid_max must be positive".into());
        }
        Ok(())
    }
}

/// Outside resources a run may use.
pub struct Environment<'a> {
    pub transport: Option<&'a dyn Transport>,
    pub proposer: ProposerConfig,
    pub cas: CasConfig,
}

impl Default for Environment<'_> {
    fn default() -> Self {
        Environment {
            transport: None,
            proposer: ProposerConfig::default(),
            cas: CasConfig::from_env(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PieceStatus {
    Pending,
    Proved {
        #[serde(with = "crate::expr::rational_str")]
        c: Rational,
        certificate: String,
    },
    Unknown {
        reason: String,
    },
    Unavailable {
        reason: String,
    },
}

impl PieceStatus {
    pub fn constant(&self) -> Option<&Rational> {
        match self {
            PieceStatus::Proved { c, .. } => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceResult {
    /// LaTeX description of the piece (extra constraints or segment).
    pub description: String,
    pub builtin: Option<PieceStatus>,
    pub cas: Option<PieceStatus>,
    /// `Some(false)` marks a soundness incident: one backend proved the
    /// piece at `C` and the other returned `False` at the same `C`.
    pub agreement: Option<bool>,
    pub elapsed_ms: u64,
}

impl PieceResult {
    fn new(description: String) -> Self {
        PieceResult {
            description,
            builtin: None,
            cas: None,
            agreement: None,
            elapsed_ms: 0,
        }
    }

    /// Status from the backend that decides the verdict.
    pub fn primary(&self, backend: Backend) -> Option<&PieceStatus> {
        if backend.builtin() {
            self.builtin.as_ref()
        } else {
            self.cas.as_ref()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// `heuristic`, `llm`, `user` or `trivial`.
    pub source: String,
    pub decomposition: Decomposition,
    pub description: Vec<String>,
    pub coverage: CoverageReport,
    pub pieces: Vec<PieceResult>,
}

impl Attempt {
    fn unknown_count(&self, backend: Backend) -> usize {
        self.pieces
            .iter()
            .filter(|p| p.primary(backend).and_then(PieceStatus::constant).is_none())
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Proved {
        #[serde(with = "crate::expr::rational_str")]
        c: Rational,
        pieces: usize,
    },
    Disproved {
        counterexample: Counterexample,
        #[serde(with = "crate::expr::rational_str")]
        c_ceiling: Rational,
    },
    Unknown {
        reasons: Vec<String>,
    },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Proved { .. } => 0,
            Verdict::Disproved { .. } => 1,
            Verdict::Pending | Verdict::Unknown { .. } => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pending => "pending",
            Verdict::Proved { .. } => "proved",
            Verdict::Disproved { .. } => "disproved",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub problem_id: String,
    pub problem: Problem,
    pub config: RunConfig,
    pub status: RunStatus,
    pub attempts: Vec<Attempt>,
    /// Index into `attempts` of the decomposition behind the verdict.
    pub chosen: Option<usize>,
    pub verdict: Verdict,
    pub transcripts: Vec<PromptTranscript>,
    pub warnings: Vec<String>,
    pub soundness_incidents: Vec<String>,
    pub elapsed_ms: u64,
}

impl RunRecord {
    pub fn new(problem_id: &str, problem: Problem, config: RunConfig) -> RunRecord {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            problem_id: problem_id.to_owned(),
            problem,
            config,
            status: RunStatus::Pending,
            attempts: Vec::new(),
            chosen: None,
            verdict: Verdict::Pending,
            transcripts: Vec::new(),
            warnings: Vec::new(),
            soundness_incidents: Vec::new(),
            elapsed_ms: 0,
        }
    }

    /// Verdict implied by the stored pieces; equals `verdict` for every
    /// finished record.
    pub fn recompute_verdict(&self) -> Verdict {
        if self.status != RunStatus::Finished {
            return Verdict::Pending;
        }
        if let Verdict::Disproved { .. } = &self.verdict {
            return self.verdict.clone();
        }
        let backend = self.config.backend;
        if let Some(a) = self.chosen.and_then(|i| self.attempts.get(i)) {
            if let Some(c) = aggregate(a, backend, self.problem.is_series()) {
                return Verdict::Proved {
                    c,
                    pieces: a.pieces.len(),
                };
            }
        }
        Verdict::Unknown {
            reasons: unknown_reasons(self),
        }
    }
}

/// Global constant when every piece is proved on a real cover: the maximum
/// over pieces, or the sum over segments for a series.
fn aggregate(a: &Attempt, backend: Backend, series: bool) -> Option<Rational> {
    if !a.coverage.is_cover() || a.pieces.is_empty() {
        return None;
    }
    let cs: Option<Vec<&Rational>> = a
        .pieces
        .iter()
        .map(|p| p.primary(backend).and_then(PieceStatus::constant))
        .collect();
    let cs = cs?;
    if series {
        Some(cs.into_iter().cloned().sum())
    } else {
        cs.into_iter().max().cloned()
    }
}

fn unknown_reasons(r: &RunRecord) -> Vec<String> {
    let backend = r.config.backend;
    let best = r.chosen.and_then(|i| r.attempts.get(i));
    let mut out: Vec<String> = best
        .map(|a| {
            a.pieces
                .iter()
                .filter_map(|p| match p.primary(backend) {
                    Some(PieceStatus::Unknown { reason }) | Some(PieceStatus::Unavailable { reason }) => {
                        Some(format!("{}: {reason}", p.description))
                    }
                    Some(PieceStatus::Pending) | None => Some(format!("{}: not attempted", p.description)),
                    Some(PieceStatus::Proved { .. }) => None,
                })
                .collect()
        })
        .unwrap_or_default();
    if out.is_empty() {
        out.push("no decomposition covering the domain was available".into());
    }
    out
}

/// Runs the whole pipeline, publishing snapshots through `progress`.
pub fn prove_pipeline(
    id: &str,
    p: &Problem,
    cfg: &RunConfig,
    env: &Environment,
    progress: &mut dyn FnMut(&RunRecord),
) -> RunRecord {
    let candidates = propose(p, cfg, env);
    run_candidates(id, p, cfg, env, candidates, progress)
}

/// Runs a user-supplied decomposition only.
pub fn prove_with_decomposition(
    id: &str,
    p: &Problem,
    d: Decomposition,
    cfg: &RunConfig,
    env: &Environment,
    progress: &mut dyn FnMut(&RunRecord),
) -> RunRecord {
    let c = Candidates {
        list: vec![("user".into(), d)],
        transcripts: Vec::new(),
        warnings: Vec::new(),
    };
    run_candidates(id, p, cfg, env, c, progress)
}

struct Candidates {
    list: Vec<(String, Decomposition)>,
    transcripts: Vec<PromptTranscript>,
    warnings: Vec<String>,
}

fn propose(p: &Problem, cfg: &RunConfig, env: &Environment) -> Candidates {
    let mut c = Candidates {
        list: Vec::new(),
        transcripts: Vec::new(),
        warnings: Vec::new(),
    };
    let order: &[&str] = match cfg.strategy {
        Strategy::HeuristicFirst => &["heuristic", "llm"],
        Strategy::LlmFirst => &["llm", "heuristic"],
        Strategy::LlmOnly => &["llm"],
        Strategy::HeuristicOnly => &["heuristic"],
    };
    for s in order {
        match *s {
            "heuristic" => match heuristic_propose(p) {
                Ok(ds) => c.list.extend(ds.into_iter().map(|d| ("heuristic".to_string(), d))),
                Err(e) => c.warnings.push(format!("heuristic proposer: {e}")),
            },
            _ => match env.transport {
                None => c.warnings.push("model proposer: no transport configured".into()),
                Some(t) if cfg.replay && t.is_live() => {
                    c.warnings.push("model proposer: replay mode forbids a live transport".into())
                }
                Some(t) => match llm_propose(p, &env.proposer, t) {
                    Ok((d, tr)) => {
                        c.list.push(("llm".into(), d));
                        c.transcripts.push(tr);
                    }
                    Err(e) => c.warnings.push(format!("model proposer: {e}")),
                },
            },
        }
    }
    if cfg.strategy != Strategy::LlmOnly {
        c.list.push(("trivial".into(), Decomposition::trivial(p)));
    }
    let mut seen = Vec::new();
    c.list.retain(|(_, d)| {
        let fresh = !seen.contains(d);
        seen.push(d.clone());
        fresh
    });
    c
}

fn run_candidates(
    id: &str,
    p: &Problem,
    cfg: &RunConfig,
    env: &Environment,
    cands: Candidates,
    progress: &mut dyn FnMut(&RunRecord),
) -> RunRecord {
    let start = Instant::now();
    let mut rec = RunRecord::new(id, p.clone(), cfg.clone());
    rec.status = RunStatus::Running;
    rec.transcripts = cands.transcripts;
    rec.warnings = cands.warnings;
    if let Err(e) = cfg.validate() {
        rec.warnings.push(format!("invalid configuration: {e}"));
        return finish(rec, None, start);
    }
    if cfg.backend.cas() && !env.cas.available() {
        rec.warnings
            .push("CAS backend unavailable: set WOLFRAMSCRIPT to the wolframscript executable".into());
    }
    for (source, d) in cands.list {
        let coverage = validate_cover(p, &d);
        if let CoverageReport::NotCover { witness, reason } = &coverage {
            let at: Vec<String> = witness.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            rec.warnings.push(format!(
                "decomposition from {source} does not cover the domain ({reason}); witness: {}",
                at.join(", ")
            ));
        }
        let description = d.describe(p);
        let pieces = description.iter().cloned().map(PieceResult::new).collect();
        rec.attempts.push(Attempt {
            source,
            decomposition: d,
            description,
            coverage,
            pieces,
        });
    }
    progress(&rec);
    let grid = cfg.grid();
    let chosen = match p {
        Problem::Inequality(q) => run_inequality(&mut rec, &q.lhs, &q.rhs, cfg, env, &grid, progress),
        Problem::Series(_) => run_series(&mut rec, cfg, env, &grid, progress),
    };
    let mut rec = finish(rec, chosen, start);
    if !matches!(rec.verdict, Verdict::Proved { .. }) {
        let fcfg = FalsifyConfig {
            samples: cfg.falsify_samples,
            ..FalsifyConfig::default()
        };
        if let FalsifyOutcome::Found { counterexample } = falsify(p, grid.ceiling(), &fcfg) {
            rec.verdict = Verdict::Disproved {
                counterexample,
                c_ceiling: grid.ceiling().clone(),
            };
        }
    }
    rec.elapsed_ms = start.elapsed().as_millis() as u64;
    progress(&rec);
    rec
}

fn finish(mut rec: RunRecord, chosen: Option<usize>, start: Instant) -> RunRecord {
    let backend = rec.config.backend;
    rec.chosen = chosen.or_else(|| {
        // Best attempt: a real cover with the fewest unproved pieces.
        rec.attempts
            .iter()
            .enumerate()
            .filter(|(_, a)| a.coverage.is_cover())
            .min_by_key(|(i, a)| (a.unknown_count(backend), *i))
            .map(|(i, _)| i)
    });
    for a in &mut rec.attempts {
        for piece in &mut a.pieces {
            for s in [&mut piece.builtin, &mut piece.cas] {
                if let Some(st @ PieceStatus::Pending) = s {
                    *st = PieceStatus::Unknown {
                        reason: "not attempted: an earlier piece of this decomposition failed".into(),
                    };
                }
            }
        }
    }
    rec.status = RunStatus::Finished;
    rec.elapsed_ms = start.elapsed().as_millis() as u64;
    rec.verdict = rec.recompute_verdict();
    rec
}

fn grid_status(out: GridOutcome) -> PieceStatus {
    match out {
        GridOutcome::Proved { c, certificate } => PieceStatus::Proved {
            c,
            certificate: certificate.to_string(),
        },
        GridOutcome::Unknown { reason } => PieceStatus::Unknown { reason },
    }
}

fn cas_status(out: Result<CasOutcome, crate::cas::CasError>) -> PieceStatus {
    match out {
        Ok(CasOutcome::Proved { c, query }) => PieceStatus::Proved { c, certificate: query },
        Ok(CasOutcome::Unknown { reason }) => PieceStatus::Unknown { reason },
        Err(e) => PieceStatus::Unavailable { reason: e.to_string() },
    }
}

/// Asks the CAS about `f <= C g` at a constant the builtin prover certified.
fn cross_check(f: &Expr, g: &Expr, r: &Region, c: &Rational, env: &Environment) -> Option<bool> {
    let q = build_resolve_query(f, g, r, c, DEFAULT_TIMEOUT_SECS).ok()?;
    match run_resolve(&q, &env.cas).ok()?.status {
        ResolveStatus::True => Some(true),
        ResolveStatus::False => Some(false),
        ResolveStatus::Other(_) => None,
    }
}

fn run_inequality(
    rec: &mut RunRecord,
    f: &Expr,
    g: &Expr,
    cfg: &RunConfig,
    env: &Environment,
    grid: &GridSpec,
    progress: &mut dyn FnMut(&RunRecord),
) -> Option<usize> {
    let pcfg = PieceConfig {
        box_budget: cfg.box_budget,
        ..PieceConfig::default()
    };
    let live: Vec<usize> = (0..rec.attempts.len())
        .filter(|&i| rec.attempts[i].coverage.is_cover())
        .collect();
    let regions: Vec<Vec<Region>> = rec
        .attempts
        .iter()
        .map(|a| match &a.decomposition {
            Decomposition::RegionCover { pieces } => pieces.clone(),
            Decomposition::Breakpoints { .. } => Vec::new(),
        })
        .collect();
    let mut chosen = None;
    if cfg.backend.builtin() {
        let mut searches: Vec<Vec<Option<GridSearch>>> =
            regions.iter().map(|rs| rs.iter().map(|_| None).collect()).collect();
        let passes = if cfg.quick_budget < cfg.box_budget {
            vec![cfg.quick_budget, cfg.box_budget]
        } else {
            vec![cfg.box_budget]
        };
        'passes: for budget in passes {
            for &ai in &live {
                let mut all = true;
                for (pi, r) in regions[ai].iter().enumerate() {
                    if rec.attempts[ai].pieces[pi].builtin.as_ref().is_some_and(|s| s.constant().is_some()) {
                        continue;
                    }
                    let t = Instant::now();
                    let status = match &mut searches[ai][pi] {
                        Some(s) if s.all_refuted(grid) => None,
                        Some(s) => Some(grid_status(s.run(grid, budget))),
                        slot @ None => match GridSearch::new(f, g, r, &pcfg) {
                            Ok(s) => Some(grid_status(slot.insert(s).run(grid, budget))),
                            Err(e) => Some(PieceStatus::Unknown { reason: e.to_string() }),
                        },
                    };
                    let piece = &mut rec.attempts[ai].pieces[pi];
                    piece.elapsed_ms += t.elapsed().as_millis() as u64;
                    if let Some(st) = status {
                        piece.builtin = Some(st);
                    }
                    let proved = piece.builtin.as_ref().and_then(PieceStatus::constant).is_some();
                    progress(rec);
                    if !proved {
                        all = false;
                        break;
                    }
                }
                if all {
                    chosen = Some(ai);
                    break 'passes;
                }
            }
        }
    }
    let cas_targets: Vec<usize> = match (cfg.backend, chosen) {
        (Backend::Cas, _) => live.clone(),
        (Backend::Both, Some(ai)) => vec![ai],
        _ => Vec::new(),
    };
    for ai in cas_targets {
        let mut all = true;
        for (pi, r) in regions[ai].iter().enumerate() {
            let t = Instant::now();
            let builtin_c = rec.attempts[ai].pieces[pi]
                .builtin
                .as_ref()
                .and_then(PieceStatus::constant)
                .cloned();
            let status = cas_status(cas_grid_search(f, g, r, grid, &env.cas));
            let agreement = builtin_c.and_then(|c| {
                if env.cas.available() {
                    cross_check(f, g, r, &c, env)
                } else {
                    None
                }
            });
            let piece = &mut rec.attempts[ai].pieces[pi];
            piece.elapsed_ms += t.elapsed().as_millis() as u64;
            all &= status.constant().is_some();
            piece.cas = Some(status);
            piece.agreement = agreement;
            if agreement == Some(false) {
                let msg = format!(
                    "piece '{}': builtin proved C = {} but the CAS returned False",
                    piece.description,
                    format_rational(piece.builtin.as_ref().and_then(PieceStatus::constant).unwrap())
                );
                rec.soundness_incidents.push(msg);
            }
            progress(rec);
        }
        if cfg.backend == Backend::Cas && all {
            chosen = Some(ai);
            break;
        }
    }
    chosen
}

fn segment_description(s: &SegmentProof, index: &str) -> String {
    use crate::latex::render_expr;
    match (&s.upper, s.peeled) {
        (_, true) => format!("{index} = {}", render_expr(&s.lower)),
        (Some(u), false) => format!("{} \\leq {index} \\leq {}", render_expr(&s.lower), render_expr(u)),
        (None, false) => format!("{index} \\geq {}", render_expr(&s.lower)),
    }
}

fn segment_status(s: &SegmentProof) -> PieceStatus {
    match &s.outcome {
        GridOutcome::Proved { c, certificate } => {
            let bound = s
                .bound
                .as_ref()
                .map(|b| format!("summand <= {} * {}; ", format_rational(&b.factor), b.bound))
                .unwrap_or_default();
            let sum = s
                .segment_sum
                .as_ref()
                .map(|e| format!("segment sum <= {e}; "))
                .unwrap_or_default();
            PieceStatus::Proved {
                c: c.clone(),
                certificate: format!("{bound}{sum}{certificate}"),
            }
        }
        GridOutcome::Unknown { reason } => PieceStatus::Unknown { reason: reason.clone() },
    }
}

fn run_series(
    rec: &mut RunRecord,
    cfg: &RunConfig,
    env: &Environment,
    grid: &GridSpec,
    progress: &mut dyn FnMut(&RunRecord),
) -> Option<usize> {
    let Problem::Series(s) = rec.problem.clone() else {
        unreachable!("series run on an inequality")
    };
    let pcfg = PieceConfig {
        box_budget: cfg.box_budget,
        ..PieceConfig::default()
    };
    for ai in 0..rec.attempts.len() {
        if !rec.attempts[ai].coverage.is_cover() {
            continue;
        }
        let Decomposition::Breakpoints { ladder } = rec.attempts[ai].decomposition.clone() else {
            continue;
        };
        let t = Instant::now();
        let proof = prove_series_with(&s, &ladder, grid, &pcfg);
        let elapsed = t.elapsed().as_millis() as u64;
        let mut pieces: Vec<PieceResult> = proof
            .segments
            .iter()
            .map(|seg| {
                let mut pr = PieceResult::new(segment_description(seg, &s.index));
                if cfg.backend.builtin() {
                    pr.builtin = Some(segment_status(seg));
                }
                pr
            })
            .collect();
        if let Some(last) = pieces.last_mut() {
            last.elapsed_ms = elapsed;
        }
        if cfg.backend.cas() {
            for (pr, seg) in pieces.iter_mut().zip(&proof.segments) {
                let Some(sum) = &seg.segment_sum else {
                    pr.cas = Some(PieceStatus::Unknown {
                        reason: "no closed-form segment bound to send".into(),
                    });
                    continue;
                };
                pr.cas = Some(cas_status(cas_grid_search(sum, &s.target, &s.params_region, grid, &env.cas)));
                if let Some(c) = pr.builtin.as_ref().and_then(PieceStatus::constant).cloned() {
                    if env.cas.available() {
                        pr.agreement = cross_check(sum, &s.target, &s.params_region, &c, env);
                        if pr.agreement == Some(false) {
                            rec.soundness_incidents.push(format!(
                                "segment '{}': builtin proved C = {} but the CAS returned False",
                                pr.description,
                                format_rational(&c)
                            ));
                        }
                    }
                }
            }
        }
        rec.attempts[ai].pieces = pieces;
        progress(rec);
        if aggregate(&rec.attempts[ai], cfg.backend, true).is_some() {
            return Some(ai);
        }
    }
    None
}
