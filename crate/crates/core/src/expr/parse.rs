//! Recursive-descent parser with precedence climbing for the expression
//! grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' INTEGER)*
//! atom    := 'x' | NUMBER | COMPLEX | FUNC '(' expr ')' | '(' expr ')'
//! COMPLEX := '(' NUMBER ('+' | '-') NUMBER 'i' ')'
//! FUNC    := exp | sin | cos | sinh | cosh
//! ```
//!
//! Numbers are plain decimals (no scientific notation); exponents are
//! positive integer literals.

use super::Expr;
use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LPar,
    RPar,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                break;
            }
            let start = lx.pos;
            let b = lx.src[lx.pos];
            let tok = match b {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    if lx.peek() == Some(b'*') {
                        return Err(err(start, "'**' is not an operator, use '^' for powers"));
                    }
                    Tok::Star
                }
                b'/' => {
                    lx.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LPar
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RPar
                }
                b'0'..=b'9' | b'.' => lx.number(start)?,
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => lx.ident(),
                other => {
                    return Err(err(start, &format!("unexpected character '{}'", other as char)))
                }
            };
            out.push((tok, start));
        }
        Ok(out)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        let mut seen_dot = false;
        while let Some(b) = self.peek() {
            match b {
                b'0'..=b'9' => self.pos += 1,
                b'.' if !seen_dot => {
                    seen_dot = true;
                    self.pos += 1;
                }
                b'.' => return Err(err(self.pos, "second decimal point in number")),
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        let value: f64 = text
            .parse()
            .map_err(|_| err(start, &format!("malformed number '{}'", text)))?;
        Ok(Tok::Num(value, text))
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while matches!(self.peek(), Some(b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_')) {
            self.pos += 1;
        }
        Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
    }
}

fn err(pos: usize, message: &str) -> Error {
    Error::Syntax { pos, message: message.to_string() }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(err(pos, what)),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = lhs + rhs;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = lhs - rhs;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = lhs * rhs;
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = lhs / rhs;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            Ok(-self.unary()?)
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let pos = self.pos();
            match self.bump() {
                Some(Tok::Num(v, text)) => {
                    if text.contains('.') || v < 1.0 || v.fract() != 0.0 {
                        return Err(err(pos, "exponent must be a positive integer literal"));
                    }
                    base = base.pow(v as u32);
                }
                _ => return Err(err(pos, "exponent must be a positive integer literal")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v, _)) => Ok(Expr::real(v)),
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var),
                "exp" | "sin" | "cos" | "sinh" | "cosh" => {
                    self.expect(Tok::LPar, "expected '(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RPar, "expected ')' to close function argument")?;
                    Ok(match name.as_str() {
                        "exp" => arg.exp(),
                        "sin" => arg.sin(),
                        "cos" => arg.cos(),
                        "sinh" => arg.sinh(),
                        _ => arg.cosh(),
                    })
                }
                other => Err(err(pos, &format!("unknown identifier '{}'", other))),
            },
            Some(Tok::LPar) => {
                if let Some(v) = self.try_complex_literal()? {
                    return Ok(Expr::Const(v));
                }
                let inner = self.expr()?;
                self.expect(Tok::RPar, "expected ')'")?;
                Ok(inner)
            }
            _ => Err(err(pos, "expected expression")),
        }
    }

    /// Attempt `(a+bi)` / `(a-bi)` starting just after the '('.  Resets
    /// position and reports `None` when the shape does not match, so the
    /// caller can parse a parenthesized expression instead.
    fn try_complex_literal(&mut self) -> Result<Option<Complex64>> {
        let save = self.idx;
        let mut neg_re = false;
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            neg_re = true;
        }
        let re = match self.bump() {
            Some(Tok::Num(v, _)) => v,
            _ => {
                self.idx = save;
                return Ok(None);
            }
        };
        let neg_im = match self.bump() {
            Some(Tok::Plus) => false,
            Some(Tok::Minus) => true,
            _ => {
                self.idx = save;
                return Ok(None);
            }
        };
        let im = match self.bump() {
            Some(Tok::Num(v, _)) => v,
            _ => {
                self.idx = save;
                return Ok(None);
            }
        };
        match self.bump() {
            Some(Tok::Ident(s)) if s == "i" => {}
            _ => {
                self.idx = save;
                return Ok(None);
            }
        }
        match self.bump() {
            Some(Tok::RPar) => {}
            _ => {
                self.idx = save;
                return Ok(None);
            }
        }
        let re = if neg_re { -re } else { re };
        let im = if neg_im { -im } else { im };
        Ok(Some(Complex64::new(re, im)))
    }
}

/// Parse an expression in the variable `x`.
pub fn parse(src: &str) -> Result<Expr> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, idx: 0, end: src.len() };
    let e = p.expr()?;
    if p.idx != p.toks.len() {
        return Err(err(p.pos(), "trailing input after expression"));
    }
    Ok(e)
}
