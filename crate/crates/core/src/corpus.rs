//! Problem store: one TOML file per problem.

use crate::latex::{parse_problem_with, ParseDiagnostics, ParseOptions};
use crate::problem::Problem;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("problem '{id}': {diagnostics}")]
    Parse {
        id: String,
        diagnostics: ParseDiagnostics,
    },
    #[error("unknown problem id '{0}'")]
    UnknownId(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedVerdict {
    Proved,
    Disproved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub statement_text: String,
    pub expected_verdict: ExpectedVerdict,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl CorpusEntry {
    pub fn parse(&self) -> Result<Problem, CorpusError> {
        parse_problem_with(&self.statement_text, &ParseOptions::default()).map_err(|d| {
            CorpusError::Parse {
                id: self.id.clone(),
                diagnostics: d,
            }
        })
    }
}

/// Default corpus directory: `DECOMP_CORPUS` or `corpus/` at the workspace root.
pub fn default_dir() -> PathBuf {
    std::env::var_os("DECOMP_CORPUS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus"))
}

/// All entries, sorted by id. The id must match the file stem.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let io = |e| CorpusError::Io {
        path: dir.to_owned(),
        source: e,
    };
    let mut out = Vec::new();
    for ent in std::fs::read_dir(dir).map_err(io)? {
        let path = ent.map_err(io)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        out.push(load_entry(&path)?);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn load_entry(path: &Path) -> Result<CorpusEntry, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let entry: CorpusEntry = toml::from_str(&text).map_err(|e| CorpusError::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if entry.id != stem {
        return Err(CorpusError::Format {
            path: path.to_owned(),
            message: format!("id '{}' does not match file name", entry.id),
        });
    }
    Ok(entry)
}

pub fn find(dir: &Path, id: &str) -> Result<CorpusEntry, CorpusError> {
    let path = dir.join(format!("{id}.toml"));
    if !path.is_file() {
        return Err(CorpusError::UnknownId(id.to_owned()));
    }
    load_entry(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_must_match_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let body = "id = \"other\"\nstatement_text = 'x \\ll x^2, x \\geq 1'\nexpected_verdict = \"proved\"\n";
        std::fs::write(dir.path().join("p.toml"), body).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::Format { .. })));
        assert!(matches!(find(dir.path(), "q"), Err(CorpusError::UnknownId(_))));
    }
}
