//! Quantifier-elimination queries for an external computer algebra system.
//!
//! Queries are rendered in Wolfram Language input form and run through
//! `wolframscript -code`. Replies are cached on disk keyed by the SHA-256 of
//! the query text. Only an exact `True` or `False` token is trusted.

mod render;

pub use render::{render_cas_constraint, render_cas_expr};

use crate::expr::{Expr, Rational};
use crate::prover::GridSpec;
use crate::region::Region;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;
use wait_timeout::ChildExt;

pub const DEFAULT_TIMEOUT_SECS: u64 = 60;
/// Concurrent CAS processes allowed per process.
pub const MAX_CONCURRENT: usize = 2;

#[derive(Debug, Error)]
pub enum CasError {
    #[error("CAS executable not found (set WOLFRAMSCRIPT)")]
    ExecutableMissing,
    #[error("unrenderable expression {0}")]
    UnrenderableExpr(String),
    #[error("CAS process failed to start: {0}")]
    Spawn(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolveQuery {
    pub vars: Vec<String>,
    pub region: Region,
    pub f: Expr,
    pub g: Expr,
    #[serde(with = "crate::expr::rational_str")]
    pub c: Rational,
    pub timeout_secs: u64,
    /// Rendered Wolfram Language text; a pure function of the other fields.
    pub text: String,
}

impl ResolveQuery {
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

/// Renders `ForAll[vars, Implies[domain, f <= C*(g)]]` over the reals.
pub fn build_resolve_query(
    f: &Expr,
    g: &Expr,
    r: &Region,
    c: &Rational,
    timeout_secs: u64,
) -> Result<ResolveQuery, CasError> {
    let vars = r.var_names();
    for v in f.free_vars().iter().chain(g.free_vars().iter()) {
        if !vars.contains(v) {
            return Err(CasError::UnrenderableExpr(format!("undeclared variable {v}")));
        }
    }
    let domain = if r.constraints.is_empty() {
        "True".to_string()
    } else {
        r.constraints
            .iter()
            .map(render_cas_constraint)
            .collect::<Vec<_>>()
            .join(" && ")
    };
    let rhs = render_cas_expr(g);
    let rhs = if matches!(g, Expr::Sum(_)) {
        format!("({rhs})")
    } else {
        rhs
    };
    let text = format!(
        "Resolve[ForAll[{{{}}}, Implies[{}, {} <= {}*{}]], Reals]",
        vars.join(", "),
        domain,
        render_cas_expr(f),
        render::rational(c),
        rhs
    );
    Ok(ResolveQuery {
        vars,
        region: r.clone(),
        f: f.clone(),
        g: g.clone(),
        c: c.clone(),
        timeout_secs,
        text,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "raw", rename_all = "snake_case")]
pub enum ResolveStatus {
    True,
    False,
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolveReply {
    pub status: ResolveStatus,
    pub transcript: String,
    pub elapsed_ms: u64,
    pub cached: bool,
}

/// `True`/`False` only for the exact token after whitespace trimming.
pub fn classify(output: &str) -> ResolveStatus {
    match output.trim() {
        "True" => ResolveStatus::True,
        "False" => ResolveStatus::False,
        other => ResolveStatus::Other(other.to_string()),
    }
}

#[derive(Clone, Debug, Default)]
pub struct CasConfig {
    pub executable: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub bypass_cache: bool,
}

impl CasConfig {
    /// Executable from `WOLFRAMSCRIPT`; cache under `DECOMP_CAS_CACHE` when set.
    pub fn from_env() -> CasConfig {
        CasConfig {
            executable: std::env::var_os("WOLFRAMSCRIPT").map(PathBuf::from),
            cache_dir: std::env::var_os("DECOMP_CAS_CACHE").map(PathBuf::from),
            bypass_cache: false,
        }
    }

    pub fn available(&self) -> bool {
        self.executable.as_ref().is_some_and(|p| p.is_file())
    }
}

static SPAWNS: AtomicUsize = AtomicUsize::new(0);
static SLOTS: (Mutex<usize>, Condvar) = (Mutex::new(0), Condvar::new());

/// CAS processes started by this process so far.
pub fn spawn_count() -> usize {
    SPAWNS.load(Ordering::SeqCst)
}

struct Slot;

impl Slot {
    fn acquire() -> Slot {
        let (lock, cv) = &SLOTS;
        let mut n = lock.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= MAX_CONCURRENT {
            n = cv.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
        Slot
    }
}

impl Drop for Slot {
    fn drop(&mut self) {
        let (lock, cv) = &SLOTS;
        let mut n = lock.lock().unwrap_or_else(|p| p.into_inner());
        *n -= 1;
        cv.notify_one();
    }
}

/// Runs a query, consulting the cache first.
pub fn run_resolve(q: &ResolveQuery, cfg: &CasConfig) -> Result<ResolveReply, CasError> {
    let cache_file = cfg.cache_dir.as_ref().map(|d| d.join(format!("{}.txt", q.hash())));
    if let (Some(path), false) = (&cache_file, cfg.bypass_cache) {
        if let Ok(transcript) = std::fs::read_to_string(path) {
            return Ok(ResolveReply {
                status: classify(&transcript),
                transcript,
                elapsed_ms: 0,
                cached: true,
            });
        }
    }
    let exe = cfg
        .executable
        .as_ref()
        .filter(|p| p.is_file())
        .ok_or(CasError::ExecutableMissing)?;
    let _slot = Slot::acquire();
    let start = Instant::now();
    SPAWNS.fetch_add(1, Ordering::SeqCst);
    let mut child = Command::new(exe)
        .arg("-code")
        .arg(&q.text)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| CasError::Spawn(e.to_string()))?;
    let finished = child
        .wait_timeout(Duration::from_secs(q.timeout_secs))
        .map_err(|e| CasError::Spawn(e.to_string()))?;
    let elapsed_ms = start.elapsed().as_millis() as u64;
    let Some(exit) = finished else {
        let _ = child.kill();
        let _ = child.wait();
        return Ok(ResolveReply {
            status: ResolveStatus::Other(format!("timeout after {} s", q.timeout_secs)),
            transcript: String::new(),
            elapsed_ms,
            cached: false,
        });
    };
    let mut out = String::new();
    if let Some(mut s) = child.stdout.take() {
        let _ = s.read_to_string(&mut out);
    }
    if !exit.success() {
        let mut err = String::new();
        if let Some(mut s) = child.stderr.take() {
            let _ = s.read_to_string(&mut err);
        }
        return Ok(ResolveReply {
            status: ResolveStatus::Other(format!("exit status {exit}")),
            transcript: format!("{out}{err}"),
            elapsed_ms,
            cached: false,
        });
    }
    if let Some(path) = &cache_file {
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let _ = std::fs::write(path, &out);
    }
    Ok(ResolveReply {
        status: classify(&out),
        transcript: out,
        elapsed_ms,
        cached: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CasOutcome {
    Proved {
        #[serde(with = "crate::expr::rational_str")]
        c: Rational,
        query: String,
    },
    Unknown {
        reason: String,
    },
}

/// Grid search on the CAS backend: one query per constant. `False` only
/// advances the grid.
pub fn cas_grid_search(
    f: &Expr,
    g: &Expr,
    r: &Region,
    grid: &GridSpec,
    cfg: &CasConfig,
) -> Result<CasOutcome, CasError> {
    let mut reason = String::from("empty grid");
    for c in grid.values() {
        let q = build_resolve_query(f, g, r, c, DEFAULT_TIMEOUT_SECS)?;
        let reply = run_resolve(&q, cfg)?;
        match reply.status {
            ResolveStatus::True => return Ok(CasOutcome::Proved { c: c.clone(), query: q.text }),
            ResolveStatus::False => reason = format!("Resolve returned False up to C = {c}"),
            ResolveStatus::Other(s) => reason = format!("Resolve returned {s} at C = {c}"),
        }
    }
    Ok(CasOutcome::Unknown { reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::int;
    use crate::latex::{parse_constraints, parse_problem};
    use crate::problem::Problem;

    fn piece1() -> (Expr, Expr, Region) {
        let Problem::Inequality(q) = parse_problem(r"x y \ll x \log x + e^y, x \geq 1, y \geq 0").unwrap() else {
            unreachable!()
        };
        let r = q.region.with(&parse_constraints(r"y \leq 2 \log x").unwrap());
        (q.lhs, q.rhs, r)
    }

    #[test]
    fn renders_a_split_piece() {
        let (f, g, r) = piece1();
        let q = build_resolve_query(&f, &g, &r, &int(2), 60).unwrap();
        assert_eq!(
            q.text,
            "Resolve[ForAll[{x, y}, Implies[x >= 1 && y >= 0 && y <= 2*Log[x], x*y <= 2*(x*Log[x] + Exp[y])]], Reals]"
        );
    }

    #[test]
    fn renders_identity_claim() {
        let r = Region::reals(&["x"], vec![crate::region::lower("x", 0)]);
        let x = Expr::var("x");
        let q = build_resolve_query(&x, &x, &r, &int(1), 60).unwrap();
        assert_eq!(q.text, "Resolve[ForAll[{x}, Implies[x >= 0, x <= 1*x]], Reals]");
    }

    #[test]
    fn classification_is_strict() {
        assert_eq!(classify(" True\n"), ResolveStatus::True);
        assert_eq!(classify("False"), ResolveStatus::False);
        for s in ["true", "True.", "TrueQ", "True && x > 0", ""] {
            assert!(matches!(classify(s), ResolveStatus::Other(_)), "{s}");
        }
    }

    #[test]
    fn missing_executable_is_reported() {
        let (f, g, r) = piece1();
        let q = build_resolve_query(&f, &g, &r, &int(2), 60).unwrap();
        let cfg = CasConfig {
            executable: Some(PathBuf::from("/nonexistent/wolframscript")),
            ..CasConfig::default()
        };
        assert!(matches!(run_resolve(&q, &cfg), Err(CasError::ExecutableMissing)));
    }
}
