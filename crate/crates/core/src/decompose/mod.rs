//! Candidate decompositions: region covers for inequalities, breakpoint
//! ladders for series.

mod cover;
mod heuristic;
mod llm;

pub use cover::{validate_cover, CoverageReport, COVER_SAMPLES};
pub use heuristic::{heuristic_propose, MAX_CANDIDATES};
pub use llm::{
    llm_propose, parse_reply, render_prompt, transcript_key, HttpTransport, PromptTranscript,
    ProposerConfig, ProposerError, RecordingTransport, ReplayTransport, Transport, PROMPT_TEMPLATE,
};

use crate::expr::Expr;
use crate::latex::{render_constraint, render_expr};
use crate::problem::Problem;
use crate::region::{Constraint, Region};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DecomposeError {
    #[error("no decomposition pattern applies")]
    NoCandidate,
    #[error("decomposition kind does not match the problem")]
    KindMismatch,
    #[error("a cover needs at least one piece")]
    Empty,
    #[error("ladder entry {0} appears twice")]
    DuplicateBreakpoint(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decomposition {
    /// Each piece is the parent region with extra constraints.
    RegionCover { pieces: Vec<Region> },
    /// Thresholds `d_1 .. d_k` in the parameters; `d_0` is the series start.
    Breakpoints { ladder: Vec<Expr> },
}

impl Decomposition {
    /// The single-piece cover (or empty ladder) of a problem.
    pub fn trivial(p: &Problem) -> Decomposition {
        match p {
            Problem::Inequality(q) => Decomposition::RegionCover {
                pieces: vec![q.region.clone()],
            },
            Problem::Series(_) => Decomposition::Breakpoints { ladder: Vec::new() },
        }
    }

    /// Builds a cover from per-piece extra constraints.
    pub fn from_extras(parent: &Region, extras: &[Vec<Constraint>]) -> Decomposition {
        Decomposition::RegionCover {
            pieces: extras.iter().map(|e| parent.with(e)).collect(),
        }
    }

    /// Number of pieces (segments for a ladder).
    pub fn len(&self) -> usize {
        match self {
            Decomposition::RegionCover { pieces } => pieces.len(),
            Decomposition::Breakpoints { ladder } => ladder.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Structural checks: kind matches, k >= 1, ladder entries distinct.
    pub fn check(&self, p: &Problem) -> Result<(), DecomposeError> {
        match (self, p) {
            (Decomposition::RegionCover { pieces }, Problem::Inequality(_)) => {
                if pieces.is_empty() {
                    return Err(DecomposeError::Empty);
                }
                Ok(())
            }
            (Decomposition::Breakpoints { ladder }, Problem::Series(_)) => {
                for (i, l) in ladder.iter().enumerate() {
                    if ladder[..i].contains(l) {
                        return Err(DecomposeError::DuplicateBreakpoint(l.clone()));
                    }
                }
                Ok(())
            }
            _ => Err(DecomposeError::KindMismatch),
        }
    }

    /// Human-readable LaTeX lines: one per piece (its extra constraints) or
    /// one per breakpoint.
    pub fn describe(&self, p: &Problem) -> Vec<String> {
        match self {
            Decomposition::RegionCover { pieces } => pieces
                .iter()
                .map(|r| {
                    let extra = extra_constraints(p.region(), r);
                    if extra.is_empty() {
                        "whole domain".to_string()
                    } else {
                        extra.iter().map(render_constraint).collect::<Vec<_>>().join(", ")
                    }
                })
                .collect(),
            Decomposition::Breakpoints { ladder } => ladder.iter().map(render_expr).collect(),
        }
    }
}

/// Constraints of `piece` that the parent region does not already state.
pub fn extra_constraints(parent: &Region, piece: &Region) -> Vec<Constraint> {
    piece
        .constraints
        .iter()
        .filter(|c| !parent.constraints.iter().any(|p| p.key() == c.key()))
        .cloned()
        .collect()
}
