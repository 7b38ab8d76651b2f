//! Lexer and recursive-descent parser for the expression language.
//!
//! Grammar (whitespace separates tokens and is otherwise ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | coordinate | function '(' expr ')' | '(' expr ')'
//! number := digits ('.' digits)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-x1^2` parses as `-(x1^2)` and `2^3^2` as `2^(3^2)`. Coordinates are
//! `x1` through `x<dim>`; the only identifiers besides coordinates are the
//! function names listed in [`Func::ALL`]. All reported offsets are
//! 0-based byte positions into the input.

use crate::error::{Error, Result};
use crate::expr::ast::{Expr, Func};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

fn lex(input: &str) -> Result<Vec<Spanned>> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let tok = match c {
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'^' => Tok::Caret,
                    b'(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                toks.push(Spanned { tok, offset: i });
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(Error::Syntax {
                            offset: i.min(bytes.len()),
                            message: String::from("expected digits after decimal point"),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                toks.push(Spanned { tok: Tok::Number(value), offset: start });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Ident(input[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &input[i..][..1]),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    dim: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next_offset(&self) -> usize {
        self.peek().map_or(self.end, |s| s.offset)
    }

    fn bump(&mut self) -> Option<&Spanned> {
        let s = self.toks.get(self.pos);
        if s.is_some() {
            self.pos += 1;
        }
        s
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|s| &s.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&Tok::Minus) {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(&Tok::Slash) {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            Ok(Expr::Neg(Box::new(self.factor()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            let exponent = self.factor()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.next_offset();
        let Some(spanned) = self.bump() else {
            return Err(Error::Syntax {
                offset,
                message: String::from("unexpected end of input"),
            });
        };
        match &spanned.tok {
            Tok::Number(v) => Ok(Expr::Number(*v)),
            Tok::Ident(name) => {
                let name = name.clone();
                if let Some(index) = coordinate_index(&name) {
                    if index == 0 || index > self.dim {
                        return Err(Error::CoordinateOutOfRange {
                            offset,
                            index,
                            dim: self.dim,
                        });
                    }
                    return Ok(Expr::Coord(index));
                }
                if let Some(func) = Func::from_name(&name) {
                    let paren_at = self.next_offset();
                    if !self.eat(&Tok::LParen) {
                        return Err(Error::Syntax {
                            offset: paren_at,
                            message: format!("expected `(` after function `{name}`"),
                        });
                    }
                    let arg = self.expr()?;
                    let close_at = self.next_offset();
                    if !self.eat(&Tok::RParen) {
                        return Err(Error::Syntax {
                            offset: close_at,
                            message: String::from("expected `)` to close function call"),
                        });
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(Error::UnknownIdentifier { offset, name })
            }
            Tok::LParen => {
                let inner = self.expr()?;
                let close_at = self.next_offset();
                if !self.eat(&Tok::RParen) {
                    return Err(Error::Syntax {
                        offset: close_at,
                        message: String::from("expected `)`"),
                    });
                }
                Ok(inner)
            }
            other => Err(Error::Syntax {
                offset,
                message: format!("unexpected token `{}`", token_text(other)),
            }),
        }
    }
}

/// `x` followed only by digits names a coordinate; returns its 1-based
/// index. Anything else is not a coordinate.
fn coordinate_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn token_text(tok: &Tok) -> String {
    match tok {
        Tok::Number(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
    }
}

/// Parses `input` as an expression over coordinates `x1..x<dim>`.
pub fn parse(input: &str, dim: usize) -> Result<Expr> {
    let toks = lex(input)?;
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        dim,
        end: input.len(),
    };
    let expr = parser.expr()?;
    if let Some(extra) = parser.peek() {
        return Err(Error::Syntax {
            offset: extra.offset,
            message: format!("unexpected token `{}` after expression", token_text(&extra.tok)),
        });
    }
    Ok(expr)
}
