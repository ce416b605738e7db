//! Canonical one-line text encoding.
//!
//! ```text
//! 3   -1/2   x   (+ a b)   (* a b)   (^ base 1/2)   (log a)   (exp a)
//! ```

use super::{format_rational, Expr, Rational};
use num_bigint::BigInt;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("s-expression error at byte {offset}: {message}")]
pub struct SexprError {
    pub offset: usize,
    pub message: String,
}

pub(super) fn write_sexpr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) => f.write_str(&format_rational(c)),
        Expr::Var(v) => f.write_str(v),
        Expr::Sum(cs) => write_list(f, "+", cs),
        Expr::Product(cs) => write_list(f, "*", cs),
        Expr::Power(b, q) => {
            f.write_str("(^ ")?;
            write_sexpr(b, f)?;
            write!(f, " {})", format_rational(q))
        }
        Expr::Log(a) => {
            f.write_str("(log ")?;
            write_sexpr(a, f)?;
            f.write_str(")")
        }
        Expr::Exp(a) => {
            f.write_str("(exp ")?;
            write_sexpr(a, f)?;
            f.write_str(")")
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, op: &str, cs: &[Expr]) -> fmt::Result {
    write!(f, "({op}")?;
    for c in cs {
        f.write_str(" ")?;
        write_sexpr(c, f)?;
    }
    f.write_str(")")
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SexprError> {
        Err(SexprError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src.as_bytes()[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn expect_close(&mut self) -> Result<(), SexprError> {
        self.skip_ws();
        if self.src.as_bytes().get(self.pos) == Some(&b')') {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }

    fn expr(&mut self) -> Result<Expr, SexprError> {
        self.skip_ws();
        match self.src.as_bytes().get(self.pos) {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let op = self.atom();
                match op {
                    "+" | "*" => {
                        let mut items = Vec::new();
                        loop {
                            self.skip_ws();
                            match self.src.as_bytes().get(self.pos) {
                                Some(b')') => {
                                    self.pos += 1;
                                    break;
                                }
                                None => return self.err("unterminated list"),
                                _ => items.push(self.expr()?),
                            }
                        }
                        Ok(if op == "+" {
                            Expr::Sum(items)
                        } else {
                            Expr::Product(items)
                        })
                    }
                    "^" => {
                        let base = self.expr()?;
                        self.skip_ws();
                        let at = self.pos;
                        let q = parse_rational(self.atom()).ok_or(SexprError {
                            offset: at,
                            message: "exponent must be a rational literal".into(),
                        })?;
                        self.expect_close()?;
                        Ok(Expr::Power(Box::new(base), q))
                    }
                    "log" | "exp" => {
                        let arg = self.expr()?;
                        self.expect_close()?;
                        Ok(if op == "log" {
                            Expr::Log(Box::new(arg))
                        } else {
                            Expr::Exp(Box::new(arg))
                        })
                    }
                    other => self.err(format!("unknown operator '{other}'")),
                }
            }
            Some(b')') => self.err("unexpected ')'"),
            Some(_) => {
                let at = self.pos;
                let tok = self.atom();
                if let Some(r) = parse_rational(tok) {
                    Ok(Expr::Const(r))
                } else if tok
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic())
                    && tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    Ok(Expr::Var(tok.to_string()))
                } else {
                    Err(SexprError {
                        offset: at,
                        message: format!("bad atom '{tok}'"),
                    })
                }
            }
        }
    }
}

pub(crate) fn parse_rational(tok: &str) -> Option<Rational> {
    let (n, d) = match tok.split_once('/') {
        Some((n, d)) => (n, d),
        None => (tok, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d == BigInt::from(0) {
        return None;
    }
    Some(Rational::new(n, d))
}

pub(super) fn parse_sexpr(s: &str) -> Result<Expr, SexprError> {
    let mut r = Reader { src: s, pos: 0 };
    let e = r.expr()?;
    r.skip_ws();
    if r.pos != s.len() {
        return r.err("trailing input");
    }
    Ok(e)
}
