use super::diagnostics::{Diagnostic, DiagnosticKind};
use crate::expr::{Rational};
use num_bigint::BigInt;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Num(Rational),
    /// Single-letter identifier with optional subscript, e.g. `x`, `x_1`.
    Ident(String),
    /// Backslash command without the backslash, e.g. `frac`, `log`, `sum`.
    Cmd(String),
    /// Plain-text keyword (`prove`, `where`, ...), lowercased.
    Word(String),
    Sym(char),
    /// Two-character operators: `<=`, `>=`, `<<`, `:=`.
    Op(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// Character offset into the original input.
    pub pos: usize,
}

const KEYWORDS: &[&str] = &[
    "prove", "show", "that", "is", "where", "for", "and", "with", "on", "all", "log", "ln", "exp",
];

/// Commands with no mathematical content.
const IGNORED: &[&str] = &[
    ";", ",", "!", ":", " ", "quad", "qquad", "left", "right", "big", "Big", "bigg", "Bigg",
    "displaystyle", "limits",
];

/// Tokenizes a LaTeX-subset statement. `$` delimiters and spacing commands
/// are dropped; `\text{...}` contributes its words.
pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() || c == '$' || c == '~' {
            i += 1;
            continue;
        }
        if c == '\\' {
            i += 1;
            if i >= chars.len() {
                return Err(Diagnostic::error(
                    DiagnosticKind::Syntax,
                    start,
                    "dangling backslash",
                ));
            }
            let name: String = if chars[i].is_ascii_alphabetic() {
                let s = i;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    i += 1;
                }
                chars[s..i].iter().collect()
            } else {
                i += 1;
                chars[i - 1].to_string()
            };
            if IGNORED.contains(&name.as_str()) {
                continue;
            }
            match name.as_str() {
                "{" => out.push(Token { tok: Tok::Sym('('), pos: start }),
                "}" => out.push(Token { tok: Tok::Sym(')'), pos: start }),
                "cdot" | "times" => out.push(Token { tok: Tok::Sym('*'), pos: start }),
                "le" | "leq" | "leqslant" => out.push(Token { tok: Tok::Op("<="), pos: start }),
                "ge" | "geq" | "geqslant" => out.push(Token { tok: Tok::Op(">="), pos: start }),
                "lt" => out.push(Token { tok: Tok::Sym('<'), pos: start }),
                "gt" => out.push(Token { tok: Tok::Sym('>'), pos: start }),
                "text" | "mathrm" | "textrm" | "mbox" => {
                    // Words inside the braces become keywords.
                    if chars.get(i) != Some(&'{') {
                        return Err(Diagnostic::error(
                            DiagnosticKind::Syntax,
                            start,
                            format!("expected '{{' after \\{name}"),
                        ));
                    }
                    i += 1;
                    while i < chars.len() && chars[i] != '}' {
                        if chars[i].is_alphabetic() {
                            let s = i;
                            while i < chars.len() && chars[i].is_alphabetic() {
                                i += 1;
                            }
                            let w: String = chars[s..i].iter().collect::<String>().to_lowercase();
                            out.push(Token { tok: Tok::Word(w), pos: s });
                        } else if chars[i] == ',' {
                            out.push(Token { tok: Tok::Sym(','), pos: i });
                            i += 1;
                        } else {
                            i += 1;
                        }
                    }
                    if i >= chars.len() {
                        return Err(Diagnostic::error(
                            DiagnosticKind::Syntax,
                            start,
                            "unterminated \\text group",
                        ));
                    }
                    i += 1;
                }
                _ => out.push(Token { tok: Tok::Cmd(name), pos: start }),
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut frac = String::new();
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    frac.push(chars[i]);
                    i += 1;
                }
            }
            let int_part: String = chars[s..i - if frac.is_empty() { 0 } else { frac.len() + 1 }]
                .iter()
                .collect();
            let digits = format!("{}{}", if int_part.is_empty() { "0" } else { &int_part }, frac);
            let n: BigInt = digits.parse().expect("digit string");
            let d = num_traits::pow(BigInt::from(10), frac.len());
            out.push(Token { tok: Tok::Num(Rational::new(n, d)), pos: s });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let run: String = chars[s..i].iter().collect();
            let lower = run.to_lowercase();
            if run.len() > 1 && KEYWORDS.contains(&lower.as_str()) {
                match lower.as_str() {
                    "log" | "ln" | "exp" => out.push(Token { tok: Tok::Cmd(lower), pos: s }),
                    _ => out.push(Token { tok: Tok::Word(lower), pos: s }),
                }
                continue;
            }
            // A run of letters is implicit multiplication of single letters;
            // only the last one may carry a subscript.
            for (k, ch) in run.chars().enumerate() {
                let mut name = ch.to_string();
                let at = s + k;
                if k + 1 == run.len() && chars.get(i) == Some(&'_') {
                    i += 1;
                    let sub = match chars.get(i) {
                        Some('{') => {
                            let b = i + 1;
                            let mut e = b;
                            while e < chars.len() && chars[e] != '}' {
                                e += 1;
                            }
                            if e >= chars.len() {
                                return Err(Diagnostic::error(
                                    DiagnosticKind::Syntax,
                                    i,
                                    "unterminated subscript",
                                ));
                            }
                            i = e + 1;
                            chars[b..e].iter().collect::<String>()
                        }
                        Some(d) if d.is_ascii_alphanumeric() => {
                            i += 1;
                            d.to_string()
                        }
                        _ => {
                            return Err(Diagnostic::error(
                                DiagnosticKind::Syntax,
                                i,
                                "expected subscript",
                            ))
                        }
                    };
                    if sub.is_empty() || !sub.chars().all(|d| d.is_ascii_alphanumeric()) {
                        return Err(Diagnostic::error(
                            DiagnosticKind::UnsupportedConstruct,
                            at,
                            format!("subscript '{sub}' on variable"),
                        ));
                    }
                    name = format!("{name}_{sub}");
                }
                out.push(Token { tok: Tok::Ident(name), pos: at });
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "<<" => Some("<<"),
            ":=" => Some(":="),
            _ => None,
        };
        if let Some(op) = op {
            out.push(Token { tok: Tok::Op(op), pos: start });
            i += 2;
            continue;
        }
        match c {
            '≤' => out.push(Token { tok: Tok::Op("<="), pos: start }),
            '≥' => out.push(Token { tok: Tok::Op(">="), pos: start }),
            '≪' => out.push(Token { tok: Tok::Op("<<"), pos: start }),
            '+' | '-' | '*' | '/' | '^' | '_' | '(' | ')' | '{' | '}' | '[' | ']' | ',' | '='
            | '<' | '>' | '.' | ':' | ';' => out.push(Token { tok: Tok::Sym(c), pos: start }),
            '−' => out.push(Token { tok: Tok::Sym('-'), pos: start }),
            '·' | '×' => out.push(Token { tok: Tok::Sym('*'), pos: start }),
            other => {
                return Err(Diagnostic::error(
                    DiagnosticKind::UnsupportedConstruct,
                    start,
                    format!("character '{other}'"),
                ))
            }
        }
        i += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn splits_letter_runs() {
        assert_eq!(
            toks("xy"),
            vec![Tok::Ident("x".into()), Tok::Ident("y".into())]
        );
    }

    #[test]
    fn keywords_and_commands() {
        assert_eq!(
            toks(r"\log x where"),
            vec![
                Tok::Cmd("log".into()),
                Tok::Ident("x".into()),
                Tok::Word("where".into())
            ]
        );
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(toks("0.25"), vec![Tok::Num(crate::expr::rat(1, 4))]);
    }

    #[test]
    fn subscripts_and_spacing() {
        assert_eq!(
            toks(r"x_{12}\;\leq x_3"),
            vec![
                Tok::Ident("x_12".into()),
                Tok::Op("<="),
                Tok::Ident("x_3".into())
            ]
        );
    }

    #[test]
    fn unsupported_character_has_offset() {
        let d = lex("x | y").unwrap_err();
        assert_eq!(d.position, 2);
    }
}
