//! Canonical LaTeX rendering. The output re-parses to the identical
//! normalized AST.

use crate::expr::{format_rational, int, Expr, Rational};
use crate::problem::Problem;
use crate::region::{Constraint, Rel};
use num_traits::{One, Signed};

/// Renders a problem as a statement accepted by the parser.
pub fn render_canonical(p: &Problem) -> String {
    match p {
        Problem::Inequality(q) => {
            let mut s = format!("{} \\ll {}", render_expr(&q.lhs), render_expr(&q.rhs));
            for c in &q.region.constraints {
                s.push_str(", ");
                s.push_str(&render_constraint(c));
            }
            s
        }
        Problem::Series(q) => {
            let mut s = format!(
                "\\sum_{{{}={}}}^{{\\infty}} {} \\ll {}",
                var_name(&q.index),
                q.start,
                render_expr(&q.summand),
                render_expr(&q.target)
            );
            for c in &q.params_region.constraints {
                s.push_str(", ");
                s.push_str(&render_constraint(c));
            }
            s
        }
    }
}

pub fn render_constraint(c: &Constraint) -> String {
    let rel = match c.rel {
        Rel::Le => "\\leq",
        Rel::Lt => "<",
        Rel::Ge => "\\geq",
        Rel::Gt => ">",
        Rel::Eq => "=",
    };
    format!("{} {rel} {}", render_expr(&c.lhs), render_expr(&c.rhs))
}

fn var_name(v: &str) -> String {
    match v.split_once('_') {
        Some((base, sub)) => format!("{base}_{{{sub}}}"),
        None => v.to_string(),
    }
}

/// Renders a normalized expression.
pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Sum(ts) => {
            let mut s = String::new();
            for (i, t) in ts.iter().enumerate() {
                let (c, _) = t.split_coefficient();
                if c.is_negative() {
                    s.push_str(if i == 0 { "-" } else { " - " });
                    s.push_str(&render_term(&negate(t)));
                } else {
                    if i > 0 {
                        s.push_str(" + ");
                    }
                    s.push_str(&render_term(t));
                }
            }
            s
        }
        other => {
            let (c, _) = other.split_coefficient();
            if c.is_negative() {
                format!("-{}", render_term(&negate(other)))
            } else {
                render_term(other)
            }
        }
    }
}

fn negate(t: &Expr) -> Expr {
    t.clone().scale(int(-1))
}

/// A non-sum term with a nonnegative coefficient.
fn render_term(t: &Expr) -> String {
    let (coeff, rest) = t.split_coefficient();
    if let Expr::Const(_) = t {
        return render_const(&coeff);
    }
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    if !coeff.numer().is_one() {
        num.push(coeff.numer().to_string());
    }
    if !coeff.denom().is_one() {
        den.push(coeff.denom().to_string());
    }
    for f in rest.factors() {
        match &f {
            Expr::Power(b, q) if q.is_negative() => {
                let inv = -q.clone();
                den.push(if inv.is_one() {
                    render_factor(b)
                } else {
                    render_power(b, &inv)
                });
            }
            other => num.push(render_factor(other)),
        }
    }
    let num_s = if num.is_empty() { "1".to_string() } else { join_factors(&num) };
    if den.is_empty() {
        num_s
    } else {
        format!("\\frac{{{}}}{{{}}}", num_s, join_factors(&den))
    }
}

fn join_factors(fs: &[String]) -> String {
    let mut s = String::new();
    for (i, f) in fs.iter().enumerate() {
        if i > 0 {
            let digit = f.starts_with(|c: char| c.is_ascii_digit());
            s.push_str(if digit { " \\cdot " } else { " " });
        }
        s.push_str(f);
    }
    s
}

fn render_const(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else if c.is_negative() {
        format!("-\\frac{{{}}}{{{}}}", -c.numer(), c.denom())
    } else {
        format!("\\frac{{{}}}{{{}}}", c.numer(), c.denom())
    }
}

fn render_factor(f: &Expr) -> String {
    match f {
        Expr::Const(c) if !c.is_negative() && c.is_integer() => c.numer().to_string(),
        Expr::Const(c) => format!("\\left({}\\right)", render_const(c)),
        Expr::Var(v) => var_name(v),
        Expr::Sum(_) | Expr::Product(_) => format!("\\left({}\\right)", render_expr(f)),
        Expr::Power(b, q) => render_power(b, q),
        Expr::Log(a) => format!("\\log\\left({}\\right)", render_expr(a)),
        Expr::Exp(a) => format!("e^{{{}}}", render_expr(a)),
    }
}

fn render_power(b: &Expr, q: &Rational) -> String {
    let base = match b {
        Expr::Var(v) => var_name(v),
        Expr::Const(c) if !c.is_negative() && c.is_integer() => c.numer().to_string(),
        other => format!("\\left({}\\right)", render_expr(other)),
    };
    format!("{base}^{{{}}}", format_rational(q))
}
