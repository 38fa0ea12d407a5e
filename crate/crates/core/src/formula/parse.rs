//! Parser for the text format printed by the `Display` impls.
//!
//! ```text
//! term    := "1" | ident | "(" term "+" term ")" | "F" "(" term ")"
//! formula := "(" term "=" term ")" | "(" formula "&" formula ")"
//!          | "(" formula "|" formula ")"
//!          | "exists" ident [ "<=" term | "in" "finv" "(" term "," number ")" ] "." formula
//! ident   := [a-z][a-z0-9_]*        (except "exists")
//! ```
//!
//! Whitespace is insignificant. An unparenthesized `term = term` is accepted
//! at the top level and as the body of `exists`.

use std::fmt;

use thiserror::Error;

use super::ast::{Formula, Term, WitnessHint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax {
        found: String,
        expected: Vec<&'static str>,
    },
    UnknownIdentifier(String),
    /// A formula where a term was required, or the reverse.
    Sort {
        expected: &'static str,
        found: &'static str,
    },
    BadNumber(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax { found, expected } => {
                write!(f, "found {found}, expected one of: {}", expected.join(", "))
            }
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            ParseErrorKind::Sort { expected, found } => {
                write!(f, "expected a {expected}, found a {found}")
            }
            ParseErrorKind::BadNumber(s) => write!(f, "bad number `{s}`"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Plus,
    Equals,
    Amp,
    Bar,
    Dot,
    Le,
    Comma,
    Number(String),
    Ident(String),
    Upper(String),
    Exists,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Ident(s) | Tok::Upper(s) => format!("identifier `{s}`"),
            Tok::Exists => "`exists`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: start_line,
                column: start_col,
            });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '=' => push(Tok::Equals, 1, &mut i, &mut col),
            '&' => push(Tok::Amp, 1, &mut i, &mut col),
            '|' => push(Tok::Bar, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '<' if chars.get(i + 1) == Some(&'=') => push(Tok::Le, 2, &mut i, &mut col),
            '0'..='9' => {
                let len = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
                let s: String = chars[i..i + len].iter().collect();
                push(Tok::Number(s), len, &mut i, &mut col);
            }
            'a'..='z' | 'A'..='Z' => {
                let len = chars[i..]
                    .iter()
                    .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                    .count();
                let s: String = chars[i..i + len].iter().collect();
                let tok = if s == "exists" {
                    Tok::Exists
                } else if c.is_ascii_lowercase() && s.chars().all(|c| !c.is_ascii_uppercase()) {
                    Tok::Ident(s)
                } else {
                    Tok::Upper(s)
                };
                push(tok, len, &mut i, &mut col);
            }
            other => {
                return Err(ParseError {
                    line,
                    column: col,
                    kind: ParseErrorKind::Syntax {
                        found: format!("character `{other}`"),
                        expected: vec!["`(`", "`1`", "identifier", "`F`", "`exists`"],
                    },
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// Either sort of parsed expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Term(Term),
    Formula(Formula),
}

impl Parsed {
    fn sort(&self) -> &'static str {
        match self {
            Parsed::Term(_) => "term",
            Parsed::Formula(_) => "formula",
        }
    }
}

impl fmt::Display for Parsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parsed::Term(t) => t.fmt(f),
            Parsed::Formula(p) => p.fmt(f),
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

const NODE_START: &[&str] = &["`(`", "`1`", "identifier", "`F`", "`exists`"];

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, at: &Spanned, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: at.line,
            column: at.column,
            kind,
        }
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        let at = self.peek();
        self.error_at(
            at,
            ParseErrorKind::Syntax {
                found: at.tok.describe(),
                expected: expected.to_vec(),
            },
        )
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            Tok::Upper(s) => {
                let at = self.peek().clone();
                Err(self.error_at(&at, ParseErrorKind::UnknownIdentifier(s.clone())))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn node(&mut self) -> Result<Parsed, ParseError> {
        let at = self.peek().clone();
        match &at.tok {
            Tok::Number(n) if n == "1" => {
                self.bump();
                Ok(Parsed::Term(Term::One))
            }
            Tok::Number(n) => Err(self.error_at(
                &at,
                ParseErrorKind::BadNumber(format!("{n}: numerals are written as sums of 1")),
            )),
            Tok::Ident(v) => {
                self.bump();
                Ok(Parsed::Term(Term::Var(v.clone())))
            }
            Tok::Upper(name) if name == "F" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Parsed::Term(Term::f(arg)))
            }
            Tok::Upper(name) => {
                Err(self.error_at(&at, ParseErrorKind::UnknownIdentifier(name.clone())))
            }
            Tok::Exists => {
                self.bump();
                let var = self.ident()?;
                let hint = match &self.peek().tok {
                    Tok::Le => {
                        self.bump();
                        WitnessHint::SearchTo(self.term()?)
                    }
                    Tok::Ident(kw) if kw == "in" => {
                        self.bump();
                        match &self.peek().tok {
                            Tok::Ident(kw) if kw == "finv" => {
                                self.bump();
                            }
                            _ => return Err(self.unexpected(&["`finv`"])),
                        }
                        self.expect(Tok::LParen, "`(`")?;
                        let target = self.term()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let slack = self.number()?;
                        self.expect(Tok::RParen, "`)`")?;
                        WitnessHint::FunctionalFInverse { target, slack }
                    }
                    Tok::Dot => WitnessHint::Unbounded,
                    _ => return Err(self.unexpected(&["`<=`", "`in`", "`.`"])),
                };
                self.expect(Tok::Dot, "`.`")?;
                let body = self.formula_node()?;
                Ok(Parsed::Formula(Formula::exists(var, hint, body)))
            }
            Tok::LParen => {
                self.bump();
                let left = self.node()?;
                let op = self.peek().clone();
                if !matches!(op.tok, Tok::Plus | Tok::Equals | Tok::Amp | Tok::Bar) {
                    return Err(self.unexpected(&["`+`", "`=`", "`&`", "`|`"]));
                }
                self.bump();
                let right_at = self.peek().clone();
                let right = self.node()?;
                self.expect(Tok::RParen, "`)`")?;
                let want = match op.tok {
                    Tok::Plus | Tok::Equals => "term",
                    _ => "formula",
                };
                for (side, side_at) in [(&left, &at), (&right, &right_at)] {
                    if side.sort() != want {
                        return Err(self.error_at(
                            side_at,
                            ParseErrorKind::Sort {
                                expected: want,
                                found: side.sort(),
                            },
                        ));
                    }
                }
                Ok(match (op.tok, left, right) {
                    (Tok::Plus, Parsed::Term(a), Parsed::Term(b)) => Parsed::Term(Term::sum(a, b)),
                    (Tok::Equals, Parsed::Term(a), Parsed::Term(b)) => {
                        Parsed::Formula(Formula::eq(a, b))
                    }
                    (Tok::Amp, Parsed::Formula(p), Parsed::Formula(q)) => {
                        Parsed::Formula(Formula::and(p, q))
                    }
                    (Tok::Bar, Parsed::Formula(p), Parsed::Formula(q)) => {
                        Parsed::Formula(Formula::or(p, q))
                    }
                    _ => unreachable!("sorts checked above"),
                })
            }
            _ => Err(self.unexpected(NODE_START)),
        }
    }

    fn number(&mut self) -> Result<u64, ParseError> {
        let at = self.peek().clone();
        match &at.tok {
            Tok::Number(n) => {
                self.bump();
                n.parse()
                    .map_err(|_| self.error_at(&at, ParseErrorKind::BadNumber(n.clone())))
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let at = self.peek().clone();
        match self.node()? {
            Parsed::Term(t) => Ok(t),
            Parsed::Formula(_) => Err(self.error_at(
                &at,
                ParseErrorKind::Sort {
                    expected: "term",
                    found: "formula",
                },
            )),
        }
    }

    /// A formula, also accepting an unparenthesized `term = term`.
    fn formula_node(&mut self) -> Result<Formula, ParseError> {
        let at = self.peek().clone();
        let first = self.node()?;
        if self.peek().tok == Tok::Equals {
            let Parsed::Term(lhs) = first else {
                return Err(self.error_at(
                    &at,
                    ParseErrorKind::Sort {
                        expected: "term",
                        found: "formula",
                    },
                ));
            };
            self.bump();
            let rhs = self.term()?;
            return Ok(Formula::eq(lhs, rhs));
        }
        match first {
            Parsed::Formula(p) => Ok(p),
            Parsed::Term(_) => {
                if self.peek().tok == Tok::Eof {
                    Err(self.error_at(
                        &at,
                        ParseErrorKind::Sort {
                            expected: "formula",
                            found: "term",
                        },
                    ))
                } else {
                    Err(self.unexpected(&["`=`"]))
                }
            }
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let phi = p.formula_node()?;
    p.finish()?;
    Ok(phi)
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parses a term or a formula, whichever the text is.
pub fn parse(text: &str) -> Result<Parsed, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let first = p.node()?;
    let out = if p.peek().tok == Tok::Equals {
        let Parsed::Term(lhs) = first else {
            return Err(p.unexpected(&["end of input"]));
        };
        p.bump();
        Parsed::Formula(Formula::eq(lhs, p.term()?))
    } else {
        first
    };
    p.finish()?;
    Ok(out)
}
