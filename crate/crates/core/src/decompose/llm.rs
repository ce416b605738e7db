//! Model-backed decomposition proposals with record/replay transports.

use super::{DecomposeError, Decomposition};
use crate::latex::{parse_constraints, parse_expr, render_constraint, render_expr};
use crate::problem::Problem;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const PROMPT_TEMPLATE: &str = include_str!("../../prompts/decomposition.txt");

const INEQUALITY_FORMAT: &str = "One piece per line. A piece is a comma-separated list of \
constraints that, together with the domain, define it.";
const SERIES_FORMAT: &str = "One breakpoint expression per line, in increasing order.";

#[derive(Debug, Error)]
pub enum ProposerError {
    #[error("provider error: {0}")]
    Provider(String),
    #[error("malformed reply after {attempts} attempt(s): {reason}")]
    MalformedReply {
        reply: String,
        reason: String,
        attempts: usize,
    },
    #[error("no recorded reply for prompt key {key}")]
    FixtureMiss { key: String },
    #[error("fixture file {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

/// One completion round trip. Implementations decide whether the network
/// is touched.
pub trait Transport: Send + Sync {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ProposerError>;

    /// `false` when replies never leave the process.
    fn is_live(&self) -> bool {
        true
    }
}

/// Stable lookup key of a request.
pub fn transcript_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

static NETWORK_CALLS: AtomicUsize = AtomicUsize::new(0);

/// Provider-agnostic JSON endpoint: posts `{model, messages}` and reads the
/// first text it recognizes in the reply.
pub struct HttpTransport {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpTransport {
    /// Reads `DECOMP_LLM_ENDPOINT` and optionally `DECOMP_LLM_API_KEY`.
    pub fn from_env() -> Result<HttpTransport, ProposerError> {
        let endpoint = std::env::var("DECOMP_LLM_ENDPOINT")
            .map_err(|_| ProposerError::Provider("DECOMP_LLM_ENDPOINT is not set".into()))?;
        Ok(HttpTransport {
            endpoint,
            api_key: std::env::var("DECOMP_LLM_API_KEY").ok(),
            timeout: Duration::from_secs(120),
        })
    }

    /// Requests issued by every `HttpTransport` in this process.
    pub fn network_calls() -> usize {
        NETWORK_CALLS.load(Ordering::SeqCst)
    }
}

impl Transport for HttpTransport {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ProposerError> {
        NETWORK_CALLS.fetch_add(1, Ordering::SeqCst);
        let body = serde_json::json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = ureq::post(&self.endpoint).timeout(self.timeout);
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp: serde_json::Value = req
            .send_json(body)
            .map_err(|e| ProposerError::Provider(e.to_string()))?
            .into_json()
            .map_err(|e| ProposerError::Provider(e.to_string()))?;
        reply_text(&resp)
            .map(str::to_owned)
            .ok_or_else(|| ProposerError::Provider(format!("unrecognized response shape: {resp}")))
    }
}

fn reply_text(v: &serde_json::Value) -> Option<&str> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.pointer("/content/0/text"))
        .or_else(|| v.get("reply"))
        .and_then(|t| t.as_str())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FixtureLine {
    key: String,
    model: String,
    prompt: String,
    reply: String,
}

/// Serves replies from a JSONL fixture file; never touches the network.
pub struct ReplayTransport {
    replies: HashMap<String, String>,
}

impl ReplayTransport {
    pub fn load(path: &Path) -> Result<ReplayTransport, ProposerError> {
        let fixture_err = |message: String| ProposerError::Fixture {
            path: path.to_owned(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fixture_err(e.to_string()))?;
        let mut replies = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: FixtureLine = serde_json::from_str(line)
                .map_err(|e| fixture_err(format!("line {}: {e}", i + 1)))?;
            replies.insert(f.key, f.reply);
        }
        Ok(ReplayTransport { replies })
    }

    /// Replies keyed by `(model, prompt)`.
    pub fn from_pairs(pairs: &[(&str, &str, &str)]) -> ReplayTransport {
        ReplayTransport {
            replies: pairs
                .iter()
                .map(|(m, p, r)| (transcript_key(m, p), r.to_string()))
                .collect(),
        }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ProposerError> {
        let key = transcript_key(model, prompt);
        self.replies
            .get(&key)
            .cloned()
            .ok_or(ProposerError::FixtureMiss { key })
    }

    fn is_live(&self) -> bool {
        false
    }
}

/// Forwards to another transport and appends each exchange to a JSONL file.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        RecordingTransport {
            inner,
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ProposerError> {
        let reply = self.inner.complete(model, prompt)?;
        let line = FixtureLine {
            key: transcript_key(model, prompt),
            model: model.to_owned(),
            prompt: prompt.to_owned(),
            reply: reply.clone(),
        };
        let err = |e: std::io::Error| ProposerError::Fixture {
            path: self.path.clone(),
            message: e.to_string(),
        };
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(err)?;
        let json = serde_json::to_string(&line).expect("fixture lines serialize");
        writeln!(f, "{json}").map_err(err)?;
        Ok(reply)
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }
}

#[derive(Clone, Debug)]
pub struct ProposerConfig {
    pub model: String,
    /// Re-prompts after a malformed reply before giving up.
    pub max_reprompts: usize,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        ProposerConfig {
            model: std::env::var("DECOMP_LLM_MODEL").unwrap_or_else(|_| "default".into()),
            max_reprompts: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptTranscript {
    pub prompt: String,
    pub reply: String,
    pub parsed: Decomposition,
    pub model: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub attempts: usize,
}

/// Fills the template for a problem.
pub fn render_prompt(p: &Problem) -> String {
    let (statement, kind, format) = match p {
        Problem::Inequality(q) => (
            format!("{} \\ll {}", render_expr(&q.lhs), render_expr(&q.rhs)),
            "inequality",
            INEQUALITY_FORMAT,
        ),
        Problem::Series(s) => (
            format!(
                "\\sum_{{{}={}}}^{{\\infty}} {} \\ll {}",
                s.index,
                s.start,
                render_expr(&s.summand),
                render_expr(&s.target)
            ),
            "series",
            SERIES_FORMAT,
        ),
    };
    let domain: Vec<String> = p.region().constraints.iter().map(render_constraint).collect();
    PROMPT_TEMPLATE
        .replace("{{statement}}", &statement)
        .replace("{{domain}}", &domain.join(", "))
        .replace("{{kind}}", kind)
        .replace("{{format}}", format)
}

/// Parses a reply in the declared output format.
pub fn parse_reply(p: &Problem, reply: &str) -> Result<Decomposition, String> {
    let lines: Vec<&str> = reply.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.is_empty() {
        return Err("empty reply".into());
    }
    let region = p.region();
    let d = match p {
        Problem::Inequality(_) => {
            let mut extras = Vec::new();
            for l in &lines {
                let cs = parse_constraints(l).map_err(|e| format!("line '{l}': {e}"))?;
                for c in &cs {
                    if let Some(v) = c.free_vars().iter().find(|v| !region.declares(v)) {
                        return Err(format!("line '{l}': unknown variable {v}"));
                    }
                }
                extras.push(cs);
            }
            Decomposition::from_extras(region, &extras)
        }
        Problem::Series(_) => {
            let mut ladder = Vec::new();
            for l in &lines {
                let e = parse_expr(l).map_err(|e| format!("line '{l}': {e}"))?;
                if let Some(v) = e.free_vars().iter().find(|v| !region.declares(v)) {
                    return Err(format!("line '{l}': {v} is not a parameter"));
                }
                ladder.push(e);
            }
            Decomposition::Breakpoints { ladder }
        }
    };
    d.check(p).map_err(|e| e.to_string())?;
    Ok(d)
}

/// Asks the model for a decomposition, re-prompting on malformed replies.
pub fn llm_propose(
    p: &Problem,
    cfg: &ProposerConfig,
    transport: &dyn Transport,
) -> Result<(Decomposition, PromptTranscript), ProposerError> {
    let base = render_prompt(p);
    let mut prompt = base.clone();
    let mut last = (String::new(), String::new());
    for attempt in 1..=cfg.max_reprompts + 1 {
        let reply = transport.complete(&cfg.model, &prompt)?;
        match parse_reply(p, &reply) {
            Ok(d) => {
                let transcript = PromptTranscript {
                    prompt,
                    reply,
                    parsed: d.clone(),
                    model: cfg.model.clone(),
                    timestamp: SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map_or(0, |t| t.as_secs()),
                    attempts: attempt,
                };
                return Ok((d, transcript));
            }
            Err(reason) => {
                prompt = format!(
                    "{base}\nYour previous reply could not be parsed ({reason}). \
                     Reply again following <output_format> exactly.\n"
                );
                last = (reply, reason);
            }
        }
    }
    Err(ProposerError::MalformedReply {
        reply: last.0,
        reason: last.1,
        attempts: cfg.max_reprompts + 1,
    })
}
