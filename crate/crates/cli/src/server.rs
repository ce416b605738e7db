//! Local HTTP JSON API. Every response body is a JSON object carrying
//! `schema_version`.

use crate::report::PROOF_VERIFIED;
use crate::session::ModelTransport;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use decomp_core::corpus::{find, load_corpus, CorpusError};
use decomp_core::decompose::Decomposition;
use decomp_core::latex::{
    parse_constraints, parse_expr, parse_problem_with, render_canonical, render_constraint, ParseDiagnostics,
    ParseOptions,
};
use decomp_core::pipeline::{
    prove_pipeline, prove_with_decomposition, RunConfig, RunRecord, RunStatus, Verdict, SCHEMA_VERSION,
};
use decomp_core::problem::Problem;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

pub struct ServerConfig {
    pub corpus_dir: PathBuf,
    /// Finished run records are written here as `<run id>.json`.
    pub store_dir: Option<PathBuf>,
    pub transport: ModelTransport,
    /// Forces replay mode on every run.
    pub replay: bool,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    cfg: ServerConfig,
    problems: Mutex<BTreeMap<String, Problem>>,
    runs: Mutex<BTreeMap<String, RunEntry>>,
    next_run: AtomicU64,
}

#[derive(Clone)]
struct RunEntry {
    record: RunRecord,
    forked_from: Option<String>,
}

impl AppState {
    pub fn new(cfg: ServerConfig) -> AppState {
        AppState(Arc::new(Inner {
            cfg,
            problems: Mutex::new(BTreeMap::new()),
            runs: Mutex::new(BTreeMap::new()),
            next_run: AtomicU64::new(1),
        }))
    }

    fn problem(&self, id: &str) -> Result<Problem, ApiError> {
        if let Some(p) = self.0.problems.lock().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Ok(p.clone());
        }
        match find(&self.0.cfg.corpus_dir, id) {
            Ok(entry) => entry.parse().map_err(|e| ApiError::internal(e.to_string())),
            Err(CorpusError::UnknownId(_)) => Err(ApiError::not_found(format!("unknown problem id '{id}'"))),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }

    fn run(&self, id: &str) -> Result<RunEntry, ApiError> {
        self.0
            .runs
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown run id '{id}'")))
    }

    fn set_record(&self, id: &str, rec: &RunRecord) {
        if let Some(e) = self.0.runs.lock().unwrap_or_else(|e| e.into_inner()).get_mut(id) {
            // Records are immutable once finished.
            if e.record.status != RunStatus::Finished {
                e.record = rec.clone();
            }
        }
    }

    /// Registers a pending run and executes it on the blocking pool.
    fn start_run(
        &self,
        problem_id: &str,
        problem: Problem,
        mut config: RunConfig,
        decomposition: Option<Decomposition>,
        forked_from: Option<String>,
    ) -> String {
        config.replay |= self.0.cfg.replay;
        let run_id = format!("run_{}", self.0.next_run.fetch_add(1, Ordering::SeqCst));
        let pending = RunRecord::new(problem_id, problem.clone(), config.clone());
        self.0.runs.lock().unwrap_or_else(|e| e.into_inner()).insert(
            run_id.clone(),
            RunEntry {
                record: pending,
                forked_from,
            },
        );
        let state = self.clone();
        let rid = run_id.clone();
        let pid = problem_id.to_owned();
        tokio::task::spawn_blocking(move || {
            let env = state.0.cfg.transport.environment(false);
            let mut publish = |r: &RunRecord| state.set_record(&rid, r);
            let rec = match decomposition {
                Some(d) => prove_with_decomposition(&pid, &problem, d, &config, &env, &mut publish),
                None => prove_pipeline(&pid, &problem, &config, &env, &mut publish),
            };
            state.set_record(&rid, &rec);
            if let Some(dir) = &state.0.cfg.store_dir {
                let _ = std::fs::create_dir_all(dir);
                if let Ok(text) = serde_json::to_string_pretty(&rec) {
                    let _ = std::fs::write(dir.join(format!("{rid}.json")), text);
                }
            }
        });
        run_id
    }
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    diagnostics: Option<ParseDiagnostics>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "bad_request",
            message: message.into(),
            diagnostics: None,
        }
    }

    fn parse(d: ParseDiagnostics) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "parse_error",
            message: d.to_string(),
            diagnostics: Some(d),
        }
    }

    fn not_found(message: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::NOT_FOUND,
            kind: "not_found",
            message: message.into(),
            diagnostics: None,
        }
    }

    fn conflict(message: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::CONFLICT,
            kind: "conflict",
            message: message.into(),
            diagnostics: None,
        }
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: message.into(),
            diagnostics: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.kind,
            "message": self.message,
        });
        if let Some(d) = self.diagnostics {
            body["diagnostics"] = json!(d.diagnostics);
        }
        (self.status, Json(body)).into_response()
    }
}

fn reply(status: StatusCode, mut body: Value) -> Response {
    body["schema_version"] = json!(SCHEMA_VERSION);
    (status, Json(body)).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    let body: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/problems", post(create_problem))
        .route("/problems/:id", get(get_problem))
        .route("/runs", post(create_run))
        .route("/runs/:id", get(get_run))
        .route("/runs/:id/decomposition", put(edit_decomposition))
        .route("/corpus", get(list_corpus))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Content-addressed id of a parsed problem.
fn problem_id(p: &Problem) -> String {
    let digest = Sha256::digest(render_canonical(p).as_bytes());
    format!("p_{}", &hex_prefix(&digest))
}

fn hex_prefix(bytes: &[u8]) -> String {
    bytes.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn problem_view(id: &str, p: &Problem) -> Value {
    let assumptions: Vec<String> = p.region().constraints.iter().map(render_constraint).collect();
    json!({
        "id": id,
        "canonical": render_canonical(p),
        "assumptions": assumptions,
        "variables": p.variables(),
        "problem": p,
    })
}

#[derive(Deserialize)]
struct ProblemRequest {
    statement: String,
}

async fn create_problem(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ProblemRequest = parse_body(&body)?;
    let p = parse_problem_with(&req.statement, &ParseOptions::default()).map_err(ApiError::parse)?;
    let id = problem_id(&p);
    s.0.problems
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(id.clone(), p.clone());
    Ok(reply(StatusCode::OK, problem_view(&id, &p)))
}

async fn get_problem(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let p = s.problem(&id)?;
    Ok(reply(StatusCode::OK, problem_view(&id, &p)))
}

#[derive(Deserialize)]
struct RunRequest {
    problem_id: String,
    #[serde(default)]
    config: RunConfig,
}

async fn create_run(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: RunRequest = parse_body(&body)?;
    req.config.validate().map_err(ApiError::bad_request)?;
    let p = s.problem(&req.problem_id)?;
    let run_id = s.start_run(&req.problem_id, p, req.config, None, None);
    Ok(reply(
        StatusCode::ACCEPTED,
        json!({ "run_id": run_id, "status": RunStatus::Pending }),
    ))
}

fn run_view(run_id: &str, e: &RunEntry) -> Value {
    let banner = matches!(e.record.verdict, Verdict::Proved { .. }).then_some(PROOF_VERIFIED);
    json!({
        "run_id": run_id,
        "forked_from": e.forked_from,
        "status": e.record.status,
        "verdict": e.record.verdict.label(),
        "banner": banner,
        "record": e.record,
    })
}

async fn get_run(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let e = s.run(&id)?;
    Ok(reply(StatusCode::OK, run_view(&id, &e)))
}

/// Pieces as LaTeX constraint lists (empty string for the whole domain),
/// or breakpoints as LaTeX expressions for a series.
#[derive(Deserialize)]
struct EditRequest {
    pieces: Option<Vec<String>>,
    breakpoints: Option<Vec<String>>,
    config: Option<RunConfig>,
}

fn decomposition_from(p: &Problem, req: &EditRequest) -> Result<Decomposition, ApiError> {
    let d = match (p, &req.pieces, &req.breakpoints) {
        (Problem::Inequality(q), Some(pieces), None) => {
            let extras = pieces
                .iter()
                .map(|t| {
                    if t.trim().is_empty() {
                        Ok(Vec::new())
                    } else {
                        parse_constraints(t)
                    }
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(ApiError::parse)?;
            Decomposition::from_extras(&q.region, &extras)
        }
        (Problem::Series(_), None, Some(bps)) => Decomposition::Breakpoints {
            ladder: bps
                .iter()
                .map(|t| parse_expr(t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(ApiError::parse)?,
        },
        (Problem::Inequality(_), _, _) => return Err(ApiError::bad_request("an inequality takes `pieces` only")),
        (Problem::Series(_), _, _) => return Err(ApiError::bad_request("a series takes `breakpoints` only")),
    };
    d.check(p).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(d)
}

/// Forks a finished run with a user-edited decomposition.
async fn edit_decomposition(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let parent = s.run(&id)?;
    if parent.record.status != RunStatus::Finished {
        return Err(ApiError::conflict(format!(
            "run '{id}' is still in progress; edit it once it has finished"
        )));
    }
    let req: EditRequest = parse_body(&body)?;
    let p = parent.record.problem.clone();
    let d = decomposition_from(&p, &req)?;
    let config = req.config.unwrap_or_else(|| parent.record.config.clone());
    config.validate().map_err(ApiError::bad_request)?;
    let run_id = s.start_run(&parent.record.problem_id, p, config, Some(d), Some(id));
    Ok(reply(
        StatusCode::ACCEPTED,
        json!({ "run_id": run_id, "status": RunStatus::Pending }),
    ))
}

async fn list_corpus(State(s): State<AppState>) -> Result<Response, ApiError> {
    let entries = load_corpus(&s.0.cfg.corpus_dir).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(reply(StatusCode::OK, json!({ "problems": entries })))
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}
