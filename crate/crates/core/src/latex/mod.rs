//! LaTeX-subset and template-phrase front end. The grammar is documented in
//! `docs/grammar.ebnf`.

mod diagnostics;
mod lexer;
mod parser;
mod render;

pub use diagnostics::{Diagnostic, DiagnosticKind, ParseDiagnostics, Severity};
pub use parser::{parse_constraints, parse_expr, parse_problem, parse_problem_with, ParseOptions};
pub use render::{render_canonical, render_constraint, render_expr};
