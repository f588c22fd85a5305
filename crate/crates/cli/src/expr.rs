//! Phase expressions: `x^2*y^2 + x^5`, `(y - x^2)^2`, `x^(1/2) + 3/4*y`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | base ('^' power)?
//! power  := rational | '(' rational ')'
//! base   := 'x' | 'y' | rational | '(' expr ')'
//! ```
//!
//! Unary minus is the one addition to the textbook grammar, so that `-x^2 + y^2`
//! reads as expected. Parentheses leave no trace in the tree; the printer puts
//! back exactly the ones the precedence rules need.

use std::fmt;

use num_traits::{ToPrimitive, Zero};
use sublevel_core::rational::{self, int};
use sublevel_core::{PuiseuxPoly, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    X,
    Y,
    /// Nonnegative literal.
    Num(Rational),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    X,
    Y,
    Num(Rational),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Slash,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let tok = match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    i += 1;
                    continue;
                }
                b'x' => Tok::X,
                b'y' => Tok::Y,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'/' => Tok::Slash,
                b'0'..=b'9' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let n: num_bigint::BigInt = src[start..i].parse().unwrap();
                    lx.toks.push((Tok::Num(Rational::from_integer(n)), start));
                    continue;
                }
                _ => {
                    let ch = src[i..].chars().next().unwrap();
                    return Err(lx.error(i, format!("unexpected character {ch:?}")));
                }
            };
            lx.toks.push((tok, i));
            i += 1;
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    fn error(&self, pos: usize, msg: String) -> ParseError {
        locate(self.src, pos, msg)
    }
}

fn locate(src: &str, pos: usize, msg: String) -> ParseError {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
    ParseError { line, col, msg }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if t != Tok::End {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(locate(self.src, self.pos(), msg.into()))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.peek() {
            Tok::End => self.fail(format!("unexpected end of input, expected {wanted}")),
            _ => {
                let p = self.pos();
                let ch = self.src[p..].chars().next().unwrap();
                self.fail(format!("unexpected {ch:?}, expected {wanted}"))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exp = if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() == Tok::Minus {
                return self.fail("negative powers are not allowed");
            }
            let r = self.rational()?;
            if *self.peek() != Tok::RParen {
                return self.unexpected("')'");
            }
            self.bump();
            r
        } else {
            if *self.peek() == Tok::Minus {
                return self.fail("negative powers are not allowed");
            }
            self.rational()?
        };
        Ok(Expr::Pow(Box::new(base), exp))
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let Tok::Num(n) = self.peek().clone() else {
            return self.unexpected("a number");
        };
        self.bump();
        if *self.peek() != Tok::Slash {
            return Ok(n);
        }
        self.bump();
        let Tok::Num(d) = self.peek().clone() else {
            return self.unexpected("a denominator");
        };
        if d.is_zero() {
            return self.fail("zero denominator");
        }
        self.bump();
        Ok(n / d)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::X => {
                self.bump();
                Ok(Expr::X)
            }
            Tok::Y => {
                self.bump();
                Ok(Expr::Y)
            }
            Tok::Num(_) => Ok(Expr::Num(self.rational()?)),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.unexpected("')'");
                }
                self.bump();
                Ok(e)
            }
            _ => self.unexpected("'x', 'y', a number or '('"),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { src, toks, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.unexpected("an operator or end of input");
    }
    Ok(e)
}

// precedence levels for printing
const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const UNARY: u8 = 2;
const ATOM: u8 = 3;

impl Expr {
    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => SUM,
            Expr::Mul(..) => PRODUCT,
            Expr::Neg(_) => UNARY,
            // `a^r` is a factor; it can't itself be raised to a power without parens
            Expr::Pow(..) => UNARY,
            Expr::X | Expr::Y => ATOM,
            Expr::Num(r) if rational::is_integer(r) => ATOM,
            Expr::Num(_) => UNARY,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.level() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::X => f.write_str("x")?,
            Expr::Y => f.write_str("y")?,
            Expr::Num(r) => f.write_str(&rational::fmt(r))?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write(f, UNARY)?;
            }
            Expr::Add(a, b) => {
                a.write(f, SUM)?;
                f.write_str(" + ")?;
                b.write(f, PRODUCT)?;
            }
            Expr::Sub(a, b) => {
                a.write(f, SUM)?;
                f.write_str(" - ")?;
                b.write(f, PRODUCT)?;
            }
            Expr::Mul(a, b) => {
                a.write(f, PRODUCT)?;
                f.write_str("*")?;
                b.write(f, UNARY)?;
            }
            Expr::Pow(b, r) => {
                // a rational literal base would read as part of the fraction
                b.write(f, ATOM)?;
                if rational::is_integer(r) {
                    write!(f, "^{}", rational::fmt(r))?;
                } else {
                    write!(f, "^({})", rational::fmt(r))?;
                }
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }

    /// Exact expansion.
    pub fn to_poly(&self) -> Result<PuiseuxPoly, String> {
        Ok(match self {
            Expr::X => PuiseuxPoly::x(),
            Expr::Y => PuiseuxPoly::y(),
            Expr::Num(r) => PuiseuxPoly::constant(r.clone()),
            Expr::Neg(e) => e.to_poly()?.neg(),
            Expr::Add(a, b) => a.to_poly()?.add(&b.to_poly()?),
            Expr::Sub(a, b) => a.to_poly()?.sub(&b.to_poly()?),
            Expr::Mul(a, b) => a.to_poly()?.mul(&b.to_poly()?),
            Expr::Pow(b, r) => {
                let p = b.to_poly()?;
                if rational::is_integer(r) {
                    let k = r.to_integer().to_u32().ok_or("exponent too large")?;
                    p.pow(k)
                } else {
                    fractional_power(&p, r)?
                }
            }
        })
    }
}

/// `(x^a)^r`; anything involving `y` or a coefficient other than 1 is refused.
fn fractional_power(p: &PuiseuxPoly, r: &Rational) -> Result<PuiseuxPoly, String> {
    let mut terms = p.terms();
    match (terms.next(), terms.next()) {
        (Some((e, c)), None) if e.b == 0 && *c == int(1) => Ok(PuiseuxPoly::monomial(int(1), &e.a * r, 0)),
        (Some((e, _)), None) if e.b > 0 => Err(format!("fractional y-power {}", rational::fmt(r))),
        _ => Err(format!("fractional power {} of a non-monomial", rational::fmt(r))),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, SUM)
    }
}

/// Source text, tree and expansion together.
#[derive(Clone, Debug)]
pub struct PhaseExpr {
    pub source: String,
    pub ast: Expr,
    pub poly: PuiseuxPoly,
}

pub fn parse_expression(src: &str) -> Result<PhaseExpr, ParseError> {
    let ast = parse(src)?;
    let poly = ast.to_poly().map_err(|msg| ParseError { line: 1, col: 1, msg })?;
    Ok(PhaseExpr {
        source: src.to_string(),
        ast,
        poly,
    })
}
