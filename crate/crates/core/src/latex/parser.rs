use super::diagnostics::{Diagnostic, DiagnosticKind, ParseDiagnostics};
use super::lexer::{lex, Tok, Token};
use crate::expr::{int, normalize, Expr, Rational};
use crate::problem::{InequalityProblem, Problem, SeriesProblem};
use crate::region::{Constraint, Region, Rel, VarDecl, VarRole};
use num_traits::{Signed, ToPrimitive};
use std::collections::{BTreeMap, BTreeSet};

/// Parser switches.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Declare variables that no side condition mentions as unconstrained
    /// reals instead of reporting an ambiguous domain.
    pub allow_unconstrained: bool,
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
    first_seen: BTreeMap<String, usize>,
}

/// Functions that may start an implicitly multiplied factor.
const FACTOR_CMDS: &[&str] = &["frac", "dfrac", "tfrac", "sqrt", "log", "ln", "exp"];

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        let toks = lex(src)?;
        Ok(Parser {
            toks,
            pos: 0,
            end: src.chars().count(),
            first_seen: BTreeMap::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_sym(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Sym(c))
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.at_sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> PResult<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{c}'")))
        }
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn syntax(&self, msg: impl Into<String>) -> Diagnostic {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(t) => describe(t),
        };
        Diagnostic::error(
            DiagnosticKind::Syntax,
            self.here(),
            format!("{}, found {found}", msg.into()),
        )
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    // expr := ['+'|'-'] term (('+'|'-') term)*
    fn expr(&mut self) -> PResult<Expr> {
        let mut terms = Vec::new();
        let mut neg = false;
        if self.eat_sym('-') {
            neg = true;
        } else {
            self.eat_sym('+');
        }
        loop {
            let t = self.term()?;
            terms.push(if neg { Expr::Product(vec![Expr::constant(-1), t]) } else { t });
            if self.eat_sym('+') {
                neg = false;
            } else if self.eat_sym('-') {
                neg = true;
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn starts_factor(&self) -> bool {
        match self.peek() {
            Some(Tok::Num(_)) | Some(Tok::Ident(_)) => true,
            Some(Tok::Sym('(')) | Some(Tok::Sym('{')) => true,
            Some(Tok::Cmd(c)) => FACTOR_CMDS.contains(&c.as_str()),
            _ => false,
        }
    }

    // term := factor (('*' | '/' | juxtaposition) factor)*
    fn term(&mut self) -> PResult<Expr> {
        let mut fs = vec![self.factor()?];
        loop {
            if self.eat_sym('*') {
                fs.push(self.factor()?);
            } else if self.eat_sym('/') {
                let d = self.factor()?;
                fs.push(Expr::Power(Box::new(d), int(-1)));
            } else if self.starts_factor() {
                // `O(` after `=` is handled by the statement parser.
                if matches!(self.peek(), Some(Tok::Ident(n)) if n == "O")
                    && self.peek_at(1) == Some(&Tok::Sym('('))
                {
                    break;
                }
                fs.push(self.factor()?);
            } else {
                break;
            }
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) })
    }

    // factor := '-' factor | primary ['^' script]
    fn factor(&mut self) -> PResult<Expr> {
        if self.eat_sym('-') {
            let f = self.factor()?;
            return Ok(Expr::Product(vec![Expr::constant(-1), f]));
        }
        let base = self.primary()?;
        if self.at_sym('^') {
            let at = self.here();
            self.pos += 1;
            return self.raise(base, at);
        }
        Ok(base)
    }

    /// A super/subscript argument: a braced group or a single token.
    fn script(&mut self) -> PResult<Expr> {
        if self.eat_sym('{') {
            let e = self.expr()?;
            self.expect_sym('}')?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Tok::Sym('-')) => {
                self.pos += 1;
                let e = self.script()?;
                Ok(Expr::Product(vec![Expr::constant(-1), e]))
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Const(n))
            }
            Some(Tok::Ident(_)) => self.primary(),
            Some(Tok::Sym('(')) => self.primary(),
            _ => Err(self.syntax("expected exponent")),
        }
    }

    /// `base^{script}`; a variable exponent is allowed over a positive
    /// constant base and becomes `exp(script log base)`.
    fn raise(&mut self, base: Expr, at: usize) -> PResult<Expr> {
        let save = self.pos;
        let e = normalize(&self.script()?);
        if let Expr::Const(q) = e {
            return Ok(Expr::Power(Box::new(base), q));
        }
        if let Expr::Const(c) = normalize(&base) {
            if c.is_positive() {
                return Ok(Expr::Exp(Box::new(Expr::Product(vec![
                    e,
                    Expr::Log(Box::new(Expr::Const(c))),
                ]))));
            }
        }
        self.pos = save;
        Ok(Expr::Power(Box::new(base), self.constant_script(at)?))
    }

    fn constant_script(&mut self, at: usize) -> PResult<Rational> {
        let e = normalize(&self.script()?);
        match e {
            Expr::Const(q) => Ok(q),
            other => Err(Diagnostic::error(
                DiagnosticKind::UnsupportedConstruct,
                at,
                format!("non-constant exponent '{other}' (only a positive constant base may have a variable exponent)"),
            )),
        }
    }

    fn group(&mut self) -> PResult<Expr> {
        if self.eat_sym('{') {
            let e = self.expr()?;
            self.expect_sym('}')?;
            Ok(e)
        } else if self.eat_sym('(') {
            let e = self.expr()?;
            self.expect_sym(')')?;
            Ok(e)
        } else {
            match self.peek().cloned() {
                Some(Tok::Num(n)) => {
                    self.pos += 1;
                    Ok(Expr::Const(n))
                }
                Some(Tok::Ident(_)) => self.primary(),
                _ => Err(self.syntax("expected '{'")),
            }
        }
    }

    /// Argument of `\log`/`\exp` without delimiters: one primary with an
    /// optional power, so `\log x^2` is `log(x^2)`.
    fn function_arg(&mut self) -> PResult<Expr> {
        if self.at_sym('(') || self.at_sym('{') {
            return self.group();
        }
        let base = self.primary()?;
        if self.at_sym('^') {
            let at = self.here();
            self.pos += 1;
            return self.raise(base, at);
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let at = self.here();
        let Some(t) = self.bump() else {
            return Err(Diagnostic::error(
                DiagnosticKind::Syntax,
                self.end,
                "expected expression, found end of input",
            ));
        };
        match t.tok {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::Ident(name) => {
                if name == "e" {
                    if self.eat_sym('^') {
                        let a = self.script()?;
                        return Ok(Expr::Exp(Box::new(a)));
                    }
                    return Ok(Expr::Exp(Box::new(Expr::one())));
                }
                self.first_seen.entry(name.clone()).or_insert(at);
                Ok(Expr::Var(name))
            }
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Sym('{') => {
                let e = self.expr()?;
                self.expect_sym('}')?;
                Ok(e)
            }
            Tok::Cmd(c) => match c.as_str() {
                "frac" | "dfrac" | "tfrac" => {
                    let n = self.group()?;
                    let d = self.group()?;
                    Ok(Expr::Product(vec![n, Expr::Power(Box::new(d), int(-1))]))
                }
                "sqrt" => {
                    let mut k = int(2);
                    if self.eat_sym('[') {
                        match self.bump().map(|t| t.tok) {
                            Some(Tok::Num(n)) if n.is_integer() && n.is_positive() => k = n,
                            _ => {
                                return Err(Diagnostic::error(
                                    DiagnosticKind::UnsupportedConstruct,
                                    at,
                                    "root index must be a positive integer",
                                ))
                            }
                        }
                        self.expect_sym(']')?;
                    }
                    let a = self.group()?;
                    Ok(Expr::Power(Box::new(a), k.recip()))
                }
                "log" | "ln" => {
                    let mut power = None;
                    if self.at_sym('^') {
                        let p = self.here();
                        self.pos += 1;
                        power = Some(self.constant_script(p)?);
                    }
                    let a = self.function_arg()?;
                    let l = Expr::Log(Box::new(a));
                    Ok(match power {
                        Some(q) => Expr::Power(Box::new(l), q),
                        None => l,
                    })
                }
                "exp" => {
                    let a = self.function_arg()?;
                    Ok(Expr::Exp(Box::new(a)))
                }
                other => Err(Diagnostic::error(
                    DiagnosticKind::UnsupportedConstruct,
                    at,
                    format!("\\{other}"),
                )),
            },
            other => {
                self.pos -= 1;
                Err(Diagnostic::error(
                    DiagnosticKind::Syntax,
                    at,
                    format!("expected expression, found {}", describe(&other)),
                ))
            }
        }
    }

    fn relop(&mut self) -> Option<Rel> {
        let r = match self.peek()? {
            Tok::Op("<=") => Rel::Le,
            Tok::Op(">=") => Rel::Ge,
            Tok::Sym('<') => Rel::Lt,
            Tok::Sym('>') => Rel::Gt,
            Tok::Sym('=') => Rel::Eq,
            _ => return None,
        };
        self.pos += 1;
        Some(r)
    }

    fn is_separator(&self) -> bool {
        match self.peek() {
            Some(Tok::Sym(',')) | Some(Tok::Sym(';')) => true,
            Some(Tok::Word(w)) => {
                matches!(w.as_str(), "where" | "for" | "with" | "on" | "and" | "all")
            }
            _ => false,
        }
    }

    fn at_trailing_period(&self) -> bool {
        self.at_sym('.') && self.pos + 1 == self.toks.len()
    }

    /// Comma/`and`-separated side conditions, including chains
    /// `a \leq b \leq c` and variable lists `x, y \geq 1`.
    fn conditions(&mut self) -> PResult<Vec<Constraint>> {
        let mut out = Vec::new();
        let mut pending: Vec<(String, usize)> = Vec::new();
        loop {
            let mut saw_sep = false;
            while self.is_separator() {
                self.pos += 1;
                saw_sep = true;
            }
            if self.at_end() || self.at_trailing_period() {
                break;
            }
            if !saw_sep && !out.is_empty() {
                return Err(self.syntax("expected ',' between conditions"));
            }
            let at = self.here();
            let first = self.expr()?;
            let mut chain = vec![first];
            let mut rels = Vec::new();
            while let Some(r) = self.relop() {
                rels.push(r);
                chain.push(self.expr()?);
            }
            if rels.is_empty() {
                match normalize(&chain[0]) {
                    Expr::Var(v) => {
                        pending.push((v, at));
                        continue;
                    }
                    _ => {
                        return Err(Diagnostic::error(
                            DiagnosticKind::Syntax,
                            at,
                            "condition without a relation",
                        ))
                    }
                }
            }
            if !pending.is_empty() {
                if rels.len() != 1 || !matches!(normalize(&chain[0]), Expr::Var(_)) {
                    return Err(Diagnostic::error(
                        DiagnosticKind::Syntax,
                        pending[0].1,
                        "variable list must be followed by a single bound like 'y \\geq 1'",
                    ));
                }
                for (v, _) in pending.drain(..) {
                    out.push(Constraint::new(Expr::Var(v), rels[0], chain[1].clone()));
                }
            }
            for (k, r) in rels.iter().enumerate() {
                out.push(Constraint::new(chain[k].clone(), *r, chain[k + 1].clone()));
            }
        }
        if let Some((_, at)) = pending.first() {
            return Err(Diagnostic::error(
                DiagnosticKind::Syntax,
                *at,
                "variable without a condition",
            ));
        }
        Ok(out)
    }

    fn series_header(&mut self) -> PResult<(String, i64)> {
        self.expect_sym('_')?;
        self.expect_sym('{')?;
        let index = match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(v)) => v,
            _ => {
                self.pos -= 1;
                return Err(self.syntax("expected summation index"));
            }
        };
        self.expect_sym('=')?;
        let neg = self.eat_sym('-');
        let start = match self.bump().map(|t| t.tok) {
            Some(Tok::Num(n)) if n.is_integer() => n.to_integer().to_i64(),
            _ => None,
        };
        let Some(start) = start else {
            self.pos -= 1;
            return Err(self.syntax("expected integer start index"));
        };
        self.expect_sym('}')?;
        let at = self.here();
        self.expect_sym('^')?;
        let braced = self.eat_sym('{');
        if self.peek() != Some(&Tok::Cmd("infty".into())) {
            return Err(Diagnostic::error(
                DiagnosticKind::UnsupportedConstruct,
                at,
                "finite upper summation limit",
            ));
        }
        self.pos += 1;
        if braced {
            self.expect_sym('}')?;
        }
        Ok((index, if neg { -start } else { start }))
    }

    /// Relation between the two sides of the claim.
    fn claim_rhs(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Op("<<")) => {
                self.pos += 1;
                self.expr()
            }
            Some(Tok::Cmd(c)) if c == "ll" => {
                self.pos += 1;
                self.expr()
            }
            Some(Tok::Sym('=')) | Some(Tok::Word(_)) => {
                if self.at_sym('=') || self.at_word("is") {
                    self.pos += 1;
                } else {
                    return Err(self.syntax("expected '\\ll', '= O(...)' or 'is O(...)'"));
                }
                if !matches!(self.peek(), Some(Tok::Ident(o)) if o == "O") {
                    return Err(self.syntax("expected 'O('"));
                }
                self.pos += 1;
                self.expect_sym('(')?;
                let g = self.expr()?;
                self.expect_sym(')')?;
                Ok(g)
            }
            _ => Err(self.syntax("expected '\\ll', '= O(...)' or 'is O(...)'")),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number {n}"),
        Tok::Ident(v) => format!("'{v}'"),
        Tok::Cmd(c) => format!("'\\{c}'"),
        Tok::Word(w) => format!("'{w}'"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::Op(o) => format!("'{o}'"),
    }
}

enum Claim {
    Inequality(Expr, Expr),
    Series {
        index: String,
        start: i64,
        summand: Expr,
        target: Expr,
    },
}

/// Parses a statement with default options.
pub fn parse_problem(text: &str) -> Result<Problem, ParseDiagnostics> {
    parse_problem_with(text, &ParseOptions::default())
}

pub fn parse_problem_with(text: &str, opts: &ParseOptions) -> Result<Problem, ParseDiagnostics> {
    let mut p = Parser::new(text)?;
    // `S(h,m) := ...` names the claim; the name is discarded.
    if let Some(k) = p.toks.iter().position(|t| t.tok == Tok::Op(":=")) {
        p.pos = k + 1;
    }
    while p.at_word("prove") || p.at_word("show") || p.at_word("that") {
        p.pos += 1;
    }
    let claim = if p.peek() == Some(&Tok::Cmd("sum".into())) {
        p.pos += 1;
        let (index, start) = p.series_header()?;
        let summand = p.expr()?;
        let target = p.claim_rhs()?;
        Claim::Series {
            index,
            start,
            summand,
            target,
        }
    } else {
        let f = p.expr()?;
        let g = p.claim_rhs()?;
        Claim::Inequality(f, g)
    };
    let constraints = p.conditions()?;
    p.eat_sym('.');
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input").into());
    }
    build(claim, constraints, &p.first_seen, opts)
}

fn build(
    claim: Claim,
    constraints: Vec<Constraint>,
    first_seen: &BTreeMap<String, usize>,
    opts: &ParseOptions,
) -> Result<Problem, ParseDiagnostics> {
    let mut diags = Vec::new();
    let pos_of = |v: &str| first_seen.get(v).copied().unwrap_or(0);
    let constrained: BTreeSet<String> = constraints.iter().flat_map(|c| c.free_vars()).collect();
    let check_domain = |vars: &BTreeSet<String>, diags: &mut Vec<Diagnostic>| {
        if opts.allow_unconstrained {
            return;
        }
        for v in vars {
            if !constrained.contains(v) {
                diags.push(Diagnostic::error(
                    DiagnosticKind::AmbiguousDomain,
                    pos_of(v),
                    format!("no condition constrains '{v}'; add one or allow unconstrained reals"),
                ));
            }
        }
    };
    let problem = match claim {
        Claim::Inequality(f, g) => {
            let (f, g) = (normalize(&f), normalize(&g));
            if g.is_zero() {
                diags.push(Diagnostic::error(
                    DiagnosticKind::InvalidProblem,
                    0,
                    "right-hand side is identically zero",
                ));
            }
            let mut claim_vars = f.free_vars();
            claim_vars.extend(g.free_vars());
            check_domain(&claim_vars, &mut diags);
            let mut all = claim_vars;
            all.extend(constrained.iter().cloned());
            let region = Region::new(decls(&all, VarRole::Real), constraints);
            Problem::Inequality(InequalityProblem {
                lhs: f,
                rhs: g,
                region,
            })
        }
        Claim::Series {
            index,
            start,
            summand,
            target,
        } => {
            let (summand, target) = (normalize(&summand), normalize(&target));
            if !summand.contains_var(&index) {
                diags.push(Diagnostic::error(
                    DiagnosticKind::InvalidProblem,
                    pos_of(&index),
                    format!("summand does not depend on the index '{index}'"),
                ));
            }
            if target.is_zero() {
                diags.push(Diagnostic::error(
                    DiagnosticKind::InvalidProblem,
                    0,
                    "target is identically zero",
                ));
            }
            if target.contains_var(&index) || constrained.contains(&index) {
                diags.push(Diagnostic::error(
                    DiagnosticKind::UnsupportedConstruct,
                    pos_of(&index),
                    format!("index '{index}' outside the summand"),
                ));
            }
            let mut params = summand.free_vars();
            params.extend(target.free_vars());
            params.remove(&index);
            check_domain(&params, &mut diags);
            params.extend(constrained.iter().cloned());
            params.remove(&index);
            Problem::Series(SeriesProblem {
                summand,
                index,
                start,
                params_region: Region::new(decls(&params, VarRole::Real), constraints),
                target,
            })
        }
    };
    if diags.is_empty() {
        Ok(problem)
    } else {
        Err(ParseDiagnostics { diagnostics: diags })
    }
}

fn decls(names: &BTreeSet<String>, role: VarRole) -> Vec<VarDecl> {
    names
        .iter()
        .map(|n| VarDecl {
            name: n.clone(),
            role,
        })
        .collect()
}

/// Parses a single expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseDiagnostics> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input").into());
    }
    Ok(normalize(&e))
}

/// Parses a list of side conditions such as `y \leq 2\log x, x \geq 1`.
pub fn parse_constraints(text: &str) -> Result<Vec<Constraint>, ParseDiagnostics> {
    let mut p = Parser::new(text)?;
    let cs = p.conditions()?;
    p.eat_sym('.');
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input").into());
    }
    Ok(cs)
}
