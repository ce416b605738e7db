//! Decomposition-based verification of asymptotic inequalities.
//!
//! A claim `f ≪ g` on a domain (or a parametric series bounded by `g`) is
//! split into regimes, each regime is simplified by leading-term domination,
//! and each piece is verified with a constant taken from a finite grid.

pub mod expr;
pub mod interval;
pub mod region;
pub mod latex;
pub mod problem;
pub mod sampling;
pub mod prover;
pub mod simplify;
pub mod decompose;
pub mod cas;
pub mod corpus;
pub mod pipeline;
