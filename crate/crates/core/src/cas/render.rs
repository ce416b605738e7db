//! Wolfram Language input form for expressions and constraints.

use crate::expr::{Expr, Rational};
use crate::region::{Constraint, Rel};
use num_traits::{One, Signed};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const ATOM: u8 = 4;

pub(super) fn rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn name(v: &str) -> String {
    let s: String = v.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) || s.is_empty() {
        format!("v{s}")
    } else {
        s
    }
}

pub fn render_cas_expr(e: &Expr) -> String {
    render(e).0
}

pub fn render_cas_constraint(c: &Constraint) -> String {
    let op = match c.rel {
        Rel::Le => "<=",
        Rel::Lt => "<",
        Rel::Ge => ">=",
        Rel::Gt => ">",
        Rel::Eq => "==",
    };
    format!("{} {op} {}", render_cas_expr(&c.lhs), render_cas_expr(&c.rhs))
}

fn wrap(e: &Expr, min: u8) -> String {
    let (s, p) = render(e);
    if p < min {
        format!("({s})")
    } else {
        s
    }
}

/// Rendered text and its precedence level.
fn render(e: &Expr) -> (String, u8) {
    match e {
        Expr::Const(r) => {
            let p = if r.is_integer() && !r.is_negative() {
                ATOM
            } else if r.is_negative() {
                SUM
            } else {
                PRODUCT
            };
            (rational(r), p)
        }
        Expr::Var(v) => (name(v), ATOM),
        Expr::Log(a) => (format!("Log[{}]", render_cas_expr(a)), ATOM),
        Expr::Exp(a) => (format!("Exp[{}]", render_cas_expr(a)), ATOM),
        Expr::Power(b, q) => {
            let exp = if q.is_integer() && !q.is_negative() {
                rational(q)
            } else {
                format!("({})", rational(q))
            };
            (format!("{}^{exp}", wrap(b, ATOM)), 3)
        }
        Expr::Sum(ts) => {
            // Positive terms first so that subtraction reads naturally.
            let (pos, neg): (Vec<&Expr>, Vec<&Expr>) =
                ts.iter().partition(|t| !t.has_negative_coefficient());
            let mut out = String::new();
            for (i, t) in pos.iter().chain(neg.iter()).enumerate() {
                if t.has_negative_coefficient() {
                    out.push_str(if i == 0 { "-" } else { " - " });
                    out.push_str(&wrap(&(*t).clone().scale(-Rational::one()), PRODUCT));
                } else {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    out.push_str(&wrap(t, PRODUCT));
                }
            }
            (out, SUM)
        }
        Expr::Product(_) => {
            let (c, rest) = e.split_coefficient();
            let mut fs = rest.factors();
            // Variables and their powers lead, as a reader would write them.
            fs.sort_by_key(|f| match f {
                Expr::Var(_) => 0,
                Expr::Power(b, _) if matches!(b.as_ref(), Expr::Var(_)) => 0,
                _ => 1,
            });
            let body: Vec<String> = fs.iter().map(|f| wrap(f, 3)).collect();
            let body = body.join("*");
            if c.is_one() {
                (body, PRODUCT)
            } else if c == -Rational::one() {
                (format!("-{body}"), SUM)
            } else {
                let p = if c.is_negative() { SUM } else { PRODUCT };
                (format!("{}*{body}", rational(&c)), p)
            }
        }
    }
}
