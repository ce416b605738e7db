use super::piece::{PieceConfig, PieceContext};
use super::{Certificate, GridSpec, PieceOutcome, ProverError};
use crate::expr::{format_rational, Expr, Rational};
use crate::region::Region;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GridOutcome {
    Proved {
        #[serde(with = "crate::expr::rational_str")]
        c: Rational,
        certificate: Certificate,
    },
    Unknown {
        reason: String,
    },
}

impl GridOutcome {
    pub fn constant(&self) -> Option<&Rational> {
        match self {
            GridOutcome::Proved { c, .. } => Some(c),
            GridOutcome::Unknown { .. } => None,
        }
    }
}

/// Grid search over one piece that remembers refuted constants between
/// passes of increasing budget.
pub struct GridSearch {
    ctx: PieceContext,
    refuted: BTreeSet<usize>,
    last_reason: String,
}

impl GridSearch {
    pub fn new(f: &Expr, g: &Expr, r: &Region, cfg: &PieceConfig) -> Result<GridSearch, ProverError> {
        Ok(GridSearch {
            ctx: PieceContext::new(f, g, r, cfg)?,
            refuted: BTreeSet::new(),
            last_reason: String::new(),
        })
    }

    /// Tries the constants in increasing order with `budget` boxes each and
    /// returns the first that is certified.
    pub fn run(&mut self, grid: &GridSpec, budget: usize) -> GridOutcome {
        for (i, c) in grid.values().iter().enumerate() {
            if self.refuted.contains(&i) {
                continue;
            }
            let a = self.ctx.attempt(c, budget);
            if a.refuted {
                self.refuted.insert(i);
            }
            match a.outcome {
                PieceOutcome::Proved(cert) => {
                    return GridOutcome::Proved {
                        c: c.clone(),
                        certificate: cert,
                    }
                }
                PieceOutcome::Unknown(r) => self.last_reason = r,
            }
        }
        GridOutcome::Unknown {
            reason: format!(
                "no constant up to {} certified; last: {}",
                format_rational(grid.ceiling()),
                self.last_reason
            ),
        }
    }

    pub fn all_refuted(&self, grid: &GridSpec) -> bool {
        self.refuted.len() == grid.values().len()
    }
}

/// Smallest grid constant for which `f <= C g` is certified on `r`.
pub fn grid_search(f: &Expr, g: &Expr, r: &Region, grid: &GridSpec) -> Result<GridOutcome, ProverError> {
    grid_search_with(f, g, r, grid, &PieceConfig::default())
}

/// As [`grid_search`]: a cheap pass over the whole grid, then a pass with the
/// full budget.
pub fn grid_search_with(
    f: &Expr,
    g: &Expr,
    r: &Region,
    grid: &GridSpec,
    cfg: &PieceConfig,
) -> Result<GridOutcome, ProverError> {
    let mut s = GridSearch::new(f, g, r, cfg)?;
    let quick = cfg.box_budget.min(4096);
    let out = s.run(grid, quick);
    if out.constant().is_some() || quick == cfg.box_budget {
        return Ok(out);
    }
    Ok(s.run(grid, cfg.box_budget))
}
