//! Piece prover: certifies `f <= C g` on a region for constants drawn from
//! a fixed grid, bounds series segments, and searches for counterexamples.

pub mod bnb;
mod falsify;
mod grid;
mod piece;
mod series;

pub use bnb::{prove_nonneg, BnbConfig, BnbOutcome};
pub use falsify::{falsify, Counterexample, FalsifyConfig, FalsifyOutcome};
pub use grid::{grid_search, grid_search_with, GridOutcome, GridSearch};
pub use piece::{prove_piece, prove_piece_with, PieceConfig, PieceContext};
pub use series::{
    bound_segment_sum, prove_series, prove_series_with, SegmentProof, SeriesError, SeriesProof,
};

use crate::expr::{format_rational, int, Expr, Rational};
use crate::simplify::JustificationStep;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProverError {
    /// `f` or `g` is not defined everywhere on the region.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Strictly increasing positive constants tried in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(with = "rational_vec")]
    values: Vec<Rational>,
}

impl GridSpec {
    pub fn new(values: Vec<Rational>) -> Result<GridSpec, ProverError> {
        if values.is_empty() {
            return Err(ProverError::InvalidGrid("empty".into()));
        }
        if values.iter().any(|v| !v.is_positive()) {
            return Err(ProverError::InvalidGrid("constants must be positive".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProverError::InvalidGrid("constants must increase strictly".into()));
        }
        Ok(GridSpec { values })
    }

    /// `1, 2, 4, ..., 8192, 10^4`.
    pub fn standard() -> GridSpec {
        let mut values: Vec<Rational> = (0..14).map(|k| int(1 << k)).collect();
        values.push(int(10_000));
        GridSpec { values }
    }

    /// The standard grid truncated at `max`.
    pub fn up_to(max: &Rational) -> GridSpec {
        let mut values: Vec<Rational> = GridSpec::standard()
            .values
            .into_iter()
            .filter(|v| v <= max)
            .collect();
        if values.is_empty() {
            values.push(max.clone());
        }
        GridSpec { values }
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn ceiling(&self) -> &Rational {
        self.values.last().expect("grid is non-empty")
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::standard()
    }
}

mod rational_vec {
    use crate::expr::{format_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| {
                crate::expr::parse_rational_str(s)
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid rational '{s}'")))
            })
            .collect()
    }
}

/// Evidence that `f <= C g` holds on a piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "crate::expr::rational_str")]
    pub c: Rational,
    /// How the residuals were obtained, e.g. `eliminate y; divided by (exp y)`.
    pub route: String,
    /// Expressions certified nonnegative; all of them together imply the claim.
    pub residuals: Vec<Expr>,
    pub steps: Vec<JustificationStep>,
    pub boxes: usize,
}

impl std::fmt::Display for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "C = {} via {} ({} boxes)",
            format_rational(&self.c),
            self.route,
            self.boxes
        )?;
        for s in &self.steps {
            write!(f, "; {s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceOutcome {
    Proved(Certificate),
    Unknown(String),
}
