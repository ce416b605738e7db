//! Regime simplification: bounds a summand on a region by a single monomial
//! times a constant, with a replayable justification.

mod dominate;
mod replay;
mod steps;

pub use dominate::{dominate_bound, RegimeBound, SimplifyError};
pub use replay::{replay, ReplayResult};
pub use steps::{JustificationStep, Rule, StepRelation};
