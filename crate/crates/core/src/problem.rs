//! Problem statements: `f ≪ g` on a region, or a parametric series `≪ g`.

use crate::expr::Expr;
use crate::region::{Region, VarDecl, VarRole};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityProblem {
    pub lhs: Expr,
    pub rhs: Expr,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesProblem {
    pub summand: Expr,
    pub index: String,
    pub start: i64,
    pub params_region: Region,
    pub target: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Inequality(InequalityProblem),
    Series(SeriesProblem),
}

impl Problem {
    pub fn is_series(&self) -> bool {
        matches!(self, Problem::Series(_))
    }

    /// Variables a counterexample must assign.
    pub fn variables(&self) -> Vec<VarDecl> {
        match self {
            Problem::Inequality(p) => p.region.vars.clone(),
            Problem::Series(s) => s.params_region.vars.clone(),
        }
    }

    /// Region on which the claim must hold (parameters only for series).
    pub fn region(&self) -> &Region {
        match self {
            Problem::Inequality(p) => &p.region,
            Problem::Series(s) => &s.params_region,
        }
    }

    /// The right-hand side `g`.
    pub fn target(&self) -> &Expr {
        match self {
            Problem::Inequality(p) => &p.rhs,
            Problem::Series(s) => &s.target,
        }
    }
}

impl SeriesProblem {
    /// Region of `(index, params)` for the summand with `index ≥ start`.
    pub fn summand_region(&self) -> Region {
        let mut vars = vec![VarDecl {
            name: self.index.clone(),
            role: VarRole::Index,
        }];
        vars.extend(self.params_region.vars.iter().cloned());
        let mut r = Region::new(vars, self.params_region.constraints.clone());
        r.push(crate::region::lower(&self.index, self.start));
        r
    }

    pub fn params(&self) -> Vec<String> {
        self.params_region.var_names()
    }
}

/// Free variables of a set of expressions.
pub fn free_vars_of<'a>(es: impl IntoIterator<Item = &'a Expr>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for e in es {
        out.extend(e.free_vars());
    }
    out
}
