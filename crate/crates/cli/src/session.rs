//! Resources shared by every verb: problem lookup, model transport and
//! run configuration.

use anyhow::{bail, Context, Result};
use decomp_core::corpus::{find, CorpusEntry};
use decomp_core::decompose::{HttpTransport, ReplayTransport, Transport};
use decomp_core::latex::{parse_problem_with, ParseOptions};
use decomp_core::pipeline::{Environment, RunConfig};
use decomp_core::problem::Problem;
use decomp_core::cas::CasConfig;
use decomp_core::decompose::ProposerConfig;
use std::path::{Path, PathBuf};

/// Model transport selected from flags and environment.
pub enum ModelTransport {
    None,
    Replay(ReplayTransport),
    Live(HttpTransport),
}

impl ModelTransport {
    /// Replay fixtures when given; otherwise a live endpoint if configured.
    pub fn select(replay: Option<&Path>) -> Result<ModelTransport> {
        if let Some(path) = replay {
            let t = ReplayTransport::load(path)
                .with_context(|| format!("loading replay fixtures {}", path.display()))?;
            return Ok(ModelTransport::Replay(t));
        }
        Ok(match HttpTransport::from_env() {
            Ok(t) => ModelTransport::Live(t),
            Err(_) => ModelTransport::None,
        })
    }

    pub fn as_dyn(&self) -> Option<&dyn Transport> {
        match self {
            ModelTransport::None => None,
            ModelTransport::Replay(t) => Some(t),
            ModelTransport::Live(t) => Some(t),
        }
    }

    pub fn environment(&self, bypass_cas_cache: bool) -> Environment<'_> {
        let mut cas = CasConfig::from_env();
        cas.bypass_cache = bypass_cas_cache;
        Environment {
            transport: self.as_dyn(),
            proposer: ProposerConfig::default(),
            cas,
        }
    }
}

/// A problem named by corpus id or given inline.
pub struct Target {
    pub id: String,
    pub problem: Problem,
    pub entry: Option<CorpusEntry>,
}

pub fn resolve_target(corpus: &Path, id: Option<&str>, stmt: Option<&str>) -> Result<Target> {
    match (id, stmt) {
        (_, Some(text)) => {
            let problem = parse_problem_with(text, &ParseOptions::default())
                .map_err(|d| anyhow::anyhow!("parse error: {d}"))?;
            Ok(Target {
                id: id.unwrap_or("inline").to_owned(),
                problem,
                entry: None,
            })
        }
        (Some(id), None) => {
            let entry = find(corpus, id)?;
            let problem = entry.parse()?;
            Ok(Target {
                id: id.to_owned(),
                problem,
                entry: Some(entry),
            })
        }
        (None, None) => bail!("give a problem id or --stmt TEXT"),
    }
}

/// `replay` is set whenever fixtures are given.
pub fn run_config(base: RunConfig, replay: Option<&PathBuf>) -> RunConfig {
    RunConfig {
        replay: base.replay || replay.is_some(),
        ..base
    }
}
