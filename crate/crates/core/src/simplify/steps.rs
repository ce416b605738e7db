use crate::expr::{format_rational, Expr, Rational};
use crate::region::Constraint;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `a_1 + ... + a_n <= (C_1 + ... + C_n) a_j` given `a_i <= C_i a_j`.
    NumeratorTermCount,
    /// `b_1 + ... + b_m >= b_j` for a denominator with nonnegative terms.
    DenominatorLeadingTerm,
    /// `a + b >= a` given `b >= 0`.
    PositivityDrop,
    /// `e(v) <= e(u)` for `v <= u` and `e` nondecreasing in `v`.
    MonotoneSubstitution,
    /// `c e = c * e` with the numeric factor moved into the constant.
    ConstantAbsorb,
}

/// The relation a step asserts between `before` and `after`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRelation {
    /// `before <= factor * after`.
    AtMost {
        #[serde(with = "crate::expr::rational_str")]
        factor: Rational,
    },
    /// `before >= after`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JustificationStep {
    pub rule: Rule,
    pub premises: Vec<Constraint>,
    pub before: Expr,
    pub after: Expr,
    pub relation: StepRelation,
}

impl fmt::Display for JustificationStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match &self.relation {
            StepRelation::AtMost { factor } => format!("<= {} *", format_rational(factor)),
            StepRelation::AtLeast => ">=".to_string(),
        };
        write!(f, "{:?}: {} {rel} {}", self.rule, self.before, self.after)?;
        if !self.premises.is_empty() {
            let ps: Vec<String> = self.premises.iter().map(|p| p.to_string()).collect();
            write!(f, " given {}", ps.join(", "))?;
        }
        Ok(())
    }
}
