use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Syntax,
    UnsupportedConstruct,
    AmbiguousDomain,
    InvalidProblem,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Character offset into the input.
    pub position: usize,
    pub message: String,
    pub severity: Severity,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn error(kind: DiagnosticKind, position: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            position,
            message: message.into(),
            severity: Severity::Error,
            kind,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::UnsupportedConstruct => "unsupported construct",
            DiagnosticKind::AmbiguousDomain => "ambiguous domain",
            DiagnosticKind::InvalidProblem => "invalid problem",
        };
        write!(f, "{kind} at offset {}: {}", self.position, self.message)
    }
}

/// Non-empty list of parse diagnostics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
pub struct ParseDiagnostics {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseDiagnostics {
    pub fn single(d: Diagnostic) -> Self {
        ParseDiagnostics {
            diagnostics: vec![d],
        }
    }

    pub fn has_kind(&self, kind: DiagnosticKind) -> bool {
        self.diagnostics.iter().any(|d| d.kind == kind)
    }
}

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.diagnostics.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl From<Diagnostic> for ParseDiagnostics {
    fn from(d: Diagnostic) -> Self {
        ParseDiagnostics::single(d)
    }
}
