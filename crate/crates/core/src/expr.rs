//! Text syntax for products of singular generalized functions.
//!
//! ```text
//! Sum    := Prod (('+' | '-') Prod)*
//! Prod   := Factor (('*' | '.') Factor)*
//! Factor := ['-'] [Coeff ['*']] (Atom | '(' Sum ')')
//! Coeff  := Unit (['*'] Unit | '/' Int)*      Unit := Int | i | pi ['^' Int]
//! Atom   := D{'} | D(k) | H | Hc | Xp^e | Xm^e | X^-p | Xsgn^-p
//!         | LnP | LnM | LnAbs | LnSgn | Xi0p^-p | Xi0m^-p
//! e      := ['-'] Int | '(' ['-'] Int '/' Int ')'
//! ```

use std::fmt;
use std::ops::{Mul, Neg};

use num_complex::{Complex, Complex64};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::mollifier::Mollifier;
use crate::real::{Dd, Real};
use crate::reference::{RefAtom, ReferenceDistribution};
use crate::representatives::{
    product, rep_delta, rep_derived, rep_heaviside, rep_ln, rep_x_neg_int, rep_x_power, Derived,
    Representative, Sign,
};

/// Highest derivative order written on `D`.
pub const MAX_D_ORDER: usize = 4;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

type PResult<T> = std::result::Result<T, ParseError>;

/// Exact coefficient `r · iᵏ · πᵐ` with `k ∈ {0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coeff {
    pub ratio: Ratio<i64>,
    pub i: bool,
    pub pi: u32,
}

impl Coeff {
    pub fn integer(n: i64) -> Self {
        Coeff {
            ratio: Ratio::from_integer(n),
            i: false,
            pi: 0,
        }
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    pub fn is_minus_one(&self) -> bool {
        *self == Self::integer(-1)
    }

    pub fn to_complex64(self) -> Complex64 {
        let v = *self.ratio.numer() as f64 / *self.ratio.denom() as f64
            * std::f64::consts::PI.powi(self.pi as i32);
        if self.i {
            Complex64::new(0.0, v)
        } else {
            Complex64::new(v, 0.0)
        }
    }

    pub fn to_dd(self) -> Complex<Dd> {
        let mut v = Dd::from(*self.ratio.numer() as f64) / Dd::from(*self.ratio.denom() as f64);
        for _ in 0..self.pi {
            v *= Dd::pi();
        }
        if self.i {
            Complex::new(Dd::zero(), v)
        } else {
            Complex::new(v, Dd::zero())
        }
    }
}

impl Mul for Coeff {
    type Output = Coeff;

    fn mul(self, o: Coeff) -> Coeff {
        let mut ratio = self.ratio * o.ratio;
        if self.i && o.i {
            ratio = -ratio;
        }
        Coeff {
            ratio,
            i: self.i ^ o.i,
            pi: self.pi + o.pi,
        }
    }
}

impl Neg for Coeff {
    type Output = Coeff;

    fn neg(self) -> Coeff {
        Coeff {
            ratio: -self.ratio,
            ..self
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = *self.ratio.numer();
        let den = *self.ratio.denom();
        if num < 0 {
            f.write_str("-")?;
        }
        let mut parts = Vec::new();
        if num.abs() != 1 || (!self.i && self.pi == 0) {
            parts.push(num.abs().to_string());
        }
        if self.i {
            parts.push("i".into());
        }
        match self.pi {
            0 => {}
            1 => parts.push("pi".into()),
            m => parts.push(format!("pi^{m}")),
        }
        f.write_str(&parts.join(" "))?;
        if den != 1 {
            write!(f, "/{den}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    /// `D⁽ᵏ⁾`.
    D(usize),
    H,
    Hc,
    /// `X₊^a`; negative integers select `X₊^{-p}`.
    Xp(Ratio<i64>),
    Xm(Ratio<i64>),
    /// `X^{-p}`.
    X(usize),
    /// `X^{-p} sgn x`.
    Xsgn(usize),
    LnP,
    LnM,
    LnAbs,
    LnSgn,
    /// `(X + i0)^{-p}`.
    Xi0p(usize),
    /// `(X - i0)^{-p}`.
    Xi0m(usize),
}

fn fmt_exponent(a: &Ratio<i64>) -> String {
    if a.is_integer() {
        a.numer().to_string()
    } else {
        format!("({a})")
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::D(k) => write!(f, "D{}", "'".repeat(*k)),
            Symbol::H => f.write_str("H"),
            Symbol::Hc => f.write_str("Hc"),
            Symbol::Xp(a) => write!(f, "Xp^{}", fmt_exponent(a)),
            Symbol::Xm(a) => write!(f, "Xm^{}", fmt_exponent(a)),
            Symbol::X(p) => write!(f, "X^-{p}"),
            Symbol::Xsgn(p) => write!(f, "Xsgn^-{p}"),
            Symbol::LnP => f.write_str("LnP"),
            Symbol::LnM => f.write_str("LnM"),
            Symbol::LnAbs => f.write_str("LnAbs"),
            Symbol::LnSgn => f.write_str("LnSgn"),
            Symbol::Xi0p(p) => write!(f, "Xi0p^-{p}"),
            Symbol::Xi0m(p) => write!(f, "Xi0m^-{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Atom(Symbol),
    Scale(Coeff, Box<Expr>),
    Product(Vec<Expr>),
    Sum(Vec<Expr>),
}

impl Expr {
    pub fn scale(c: Coeff, e: Expr) -> Expr {
        Expr::Scale(c, Box::new(e))
    }

    /// Canonical text; `parse(e.to_string()) == e`.
    pub fn print(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Sum(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    match c {
                        Expr::Scale(k, inner) if i > 0 && k.is_minus_one() => {
                            f.write_str(" - ")?;
                            write_prod(f, inner)?;
                        }
                        _ => {
                            if i > 0 {
                                f.write_str(" + ")?;
                            }
                            write_prod(f, c)?;
                        }
                    }
                }
                Ok(())
            }
            _ => write_prod(f, self),
        }
    }
}

fn write_prod(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Product(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" * ")?;
                }
                write_factor(f, c)?;
            }
            Ok(())
        }
        _ => write_factor(f, e),
    }
}

fn write_factor(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Atom(s) => write!(f, "{s}"),
        Expr::Scale(c, inner) => {
            if c.is_minus_one() {
                f.write_str("-")?;
            } else {
                write!(f, "{c} ")?;
            }
            match inner.as_ref() {
                Expr::Atom(s) => write!(f, "{s}"),
                other => write!(f, "({other})"),
            }
        }
        other => write!(f, "({other})"),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Prime,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Dot,
    Slash,
    Caret,
    End,
}

fn lex(src: &str) -> PResult<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'\'' => Some(Tok::Prime),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'.' => Some(Tok::Dot),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                return Err(ParseError {
                    offset: start,
                    message: "floating-point literals are not allowed; use a fraction".into(),
                });
            }
            let n = src[start..i].parse::<i64>().map_err(|_| ParseError {
                offset: start,
                message: "integer literal out of range".into(),
            })?;
            out.push((Tok::Int(n), start));
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let ch = src[start..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: start,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> PResult<Expr> {
        let mut terms = vec![self.prod()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.prod()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::scale(Coeff::integer(-1), self.prod()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            Expr::Sum(terms)
        })
    }

    fn prod(&mut self) -> PResult<Expr> {
        let mut fs = vec![self.factor()?];
        while matches!(self.peek(), Tok::Star | Tok::Dot) {
            self.bump();
            fs.push(self.factor()?);
        }
        Ok(if fs.len() == 1 {
            fs.pop().expect("one factor")
        } else {
            Expr::Product(fs)
        })
    }

    fn is_unit(t: &Tok) -> bool {
        match t {
            Tok::Int(_) => true,
            Tok::Ident(s) => s == "i" || s == "pi",
            _ => false,
        }
    }

    fn is_body_start(t: &Tok) -> bool {
        match t {
            Tok::LParen => true,
            Tok::Ident(_) => !Self::is_unit(t),
            _ => false,
        }
    }

    fn coeff(&mut self) -> PResult<Option<Coeff>> {
        if !Self::is_unit(self.peek()) {
            return Ok(None);
        }
        let mut c = Coeff::one();
        loop {
            match self.peek().clone() {
                Tok::Int(n) => {
                    self.bump();
                    c = c * Coeff::integer(n);
                }
                Tok::Ident(s) if s == "i" => {
                    self.bump();
                    c = c * Coeff {
                        ratio: Ratio::one(),
                        i: true,
                        pi: 0,
                    };
                }
                Tok::Ident(s) if s == "pi" => {
                    self.bump();
                    let mut m = 1;
                    if *self.peek() == Tok::Caret {
                        self.bump();
                        match self.bump() {
                            Tok::Int(k) if (1..=16).contains(&k) => m = k as u32,
                            _ => {
                                self.pos -= 1;
                                return self.err("expected a small positive power of pi");
                            }
                        }
                    }
                    c.pi += m;
                }
                Tok::Slash => {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Int(d) if d != 0 => {
                            self.bump();
                            c.ratio /= d;
                        }
                        _ => return self.err("expected a nonzero integer denominator"),
                    }
                }
                Tok::Star if Self::is_unit(self.peek_at(1)) => {
                    self.bump();
                }
                _ => break,
            }
        }
        if *self.peek() == Tok::Star && Self::is_body_start(self.peek_at(1)) {
            self.bump();
        }
        Ok(Some(c))
    }

    fn factor(&mut self) -> PResult<Expr> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut c = self.coeff()?;
        if neg {
            c = Some(-c.unwrap_or_else(Coeff::one));
        }
        let body = match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                e
            }
            Tok::Ident(_) => Expr::Atom(self.atom()?),
            Tok::End => return self.err("unexpected end of input, expected an atom"),
            _ => return self.err("expected an atom or `(`"),
        };
        Ok(match c {
            Some(c) => Expr::scale(c, body),
            None => body,
        })
    }

    fn int(&mut self, what: &str) -> PResult<i64> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn exponent(&mut self) -> PResult<Ratio<i64>> {
        self.expect(Tok::Caret, "`^` and an exponent")?;
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let neg = *self.peek() == Tok::Minus;
        if neg {
            self.bump();
        }
        let mut a = Ratio::from_integer(self.int("an integer exponent")?);
        if paren {
            self.expect(Tok::Slash, "`/` in a fractional exponent")?;
            let d = self.int("an exponent denominator")?;
            if d == 0 {
                self.pos -= 1;
                return self.err("zero exponent denominator");
            }
            a /= d;
            self.expect(Tok::RParen, "`)` after the exponent")?;
        }
        Ok(if neg { -a } else { a })
    }

    /// Exponent that must be `-p` with `p ≥ 1`.
    fn neg_power(&mut self) -> PResult<usize> {
        let at = self.offset();
        let a = self.exponent()?;
        if a.is_integer() && *a.numer() <= -1 {
            Ok((-*a.numer()) as usize)
        } else {
            Err(ParseError {
                offset: at,
                message: "exponent must be a negative integer".into(),
            })
        }
    }

    fn atom(&mut self) -> PResult<Symbol> {
        let at = self.offset();
        let name = match self.bump() {
            Tok::Ident(s) => s,
            _ => unreachable!("checked by caller"),
        };
        let sym = match name.as_str() {
            "D" => {
                let mut k = 0;
                if *self.peek() == Tok::LParen && matches!(self.peek_at(1), Tok::Int(_)) {
                    self.bump();
                    let n = self.int("a derivative order")?;
                    self.expect(Tok::RParen, "`)`")?;
                    k = n as usize;
                } else {
                    while *self.peek() == Tok::Prime {
                        self.bump();
                        k += 1;
                    }
                }
                if k > MAX_D_ORDER {
                    return Err(ParseError {
                        offset: at,
                        message: format!("derivative order {k} exceeds {MAX_D_ORDER}"),
                    });
                }
                Symbol::D(k)
            }
            "H" => Symbol::H,
            "Hc" => Symbol::Hc,
            "Xp" | "Xm" => {
                let eat = self.offset();
                let a = self.exponent()?;
                if !a.is_integer() && a <= Ratio::from_integer(-1) {
                    return Err(ParseError {
                        offset: eat,
                        message: "fractional exponent must exceed -1".into(),
                    });
                }
                if a.is_integer() && *a.numer() > crate::mollifier::MAX_MOMENT as i64 {
                    return Err(ParseError {
                        offset: eat,
                        message: format!(
                            "integer exponent exceeds {}",
                            crate::mollifier::MAX_MOMENT
                        ),
                    });
                }
                if name == "Xp" {
                    Symbol::Xp(a)
                } else {
                    Symbol::Xm(a)
                }
            }
            "X" => Symbol::X(self.neg_power()?),
            "Xsgn" => Symbol::Xsgn(self.neg_power()?),
            "Xi0p" => Symbol::Xi0p(self.neg_power()?),
            "Xi0m" => Symbol::Xi0m(self.neg_power()?),
            "LnP" => Symbol::LnP,
            "LnM" => Symbol::LnM,
            "LnAbs" => Symbol::LnAbs,
            "LnSgn" => Symbol::LnSgn,
            other => {
                return Err(ParseError {
                    offset: at,
                    message: format!("unknown atom `{other}`"),
                })
            }
        };
        Ok(sym)
    }
}

pub fn parse(src: &str) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.sum()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => p.err("unbalanced `)`"),
        _ => p.err("unexpected token"),
    }
}

fn exponent_f64(a: &Ratio<i64>) -> f64 {
    *a.numer() as f64 / *a.denom() as f64
}

fn compile_symbol(s: Symbol, m: &Mollifier) -> Result<Representative> {
    let power = |sign: Sign, a: Ratio<i64>| {
        if a.is_integer() && a.is_negative() {
            rep_x_neg_int(m, sign, (-*a.numer() - 1) as usize)
        } else {
            rep_x_power(m, sign, exponent_f64(&a))
        }
    };
    match s {
        Symbol::D(k) => rep_delta(m, k),
        Symbol::H => rep_heaviside(m, false),
        Symbol::Hc => rep_heaviside(m, true),
        Symbol::Xp(a) => power(Sign::Plus, a),
        Symbol::Xm(a) => power(Sign::Minus, a),
        Symbol::X(p) => rep_derived(m, Derived::XNeg, p),
        Symbol::Xsgn(p) => rep_derived(m, Derived::XNegSgn, p),
        Symbol::Xi0p(p) => rep_derived(m, Derived::XPlusI0, p),
        Symbol::Xi0m(p) => rep_derived(m, Derived::XMinusI0, p),
        Symbol::LnP => rep_ln(m, Sign::Plus),
        Symbol::LnM => rep_ln(m, Sign::Minus),
        Symbol::LnAbs => rep_derived(m, Derived::LnAbs, 0),
        Symbol::LnSgn => rep_derived(m, Derived::LnSgn, 0),
    }
}

/// Builds the representative of `e` with mollifier `m`.
pub fn compile(e: &Expr, m: &Mollifier) -> Result<Representative> {
    match e {
        Expr::Atom(s) => compile_symbol(*s, m),
        Expr::Scale(c, inner) => Ok(compile(inner, m)?.scaled(c.to_dd())),
        Expr::Product(cs) => {
            let reps = cs
                .iter()
                .map(|c| compile(c, m))
                .collect::<Result<Vec<_>>>()?;
            product(&reps, Complex::new(Dd::one(), Dd::zero()))
        }
        Expr::Sum(cs) => {
            let mut it = cs.iter();
            let first = it.next().ok_or(Error::EmptyProduct)?;
            let mut acc = compile(first, m)?;
            for c in it {
                acc = acc.add(&compile(c, m)?)?;
            }
            Ok(acc)
        }
    }
}

/// The distribution an expression without products denotes.
pub fn to_reference(e: &Expr) -> Result<ReferenceDistribution> {
    let atom = |a: RefAtom| ReferenceDistribution::atom(a);
    match e {
        Expr::Atom(s) => match *s {
            Symbol::D(k) => atom(RefAtom::Delta(k)),
            Symbol::H => atom(RefAtom::Theta),
            Symbol::Hc => atom(RefAtom::ThetaCheck),
            Symbol::Xp(a) | Symbol::Xm(a) => {
                let plus = matches!(s, Symbol::Xp(_));
                if a.is_integer() && a.is_negative() {
                    let p = (-*a.numer()) as usize;
                    atom(if plus {
                        RefAtom::XPlusNeg(p)
                    } else {
                        RefAtom::XMinusNeg(p)
                    })
                } else if a.is_zero() {
                    atom(if plus {
                        RefAtom::Theta
                    } else {
                        RefAtom::ThetaCheck
                    })
                } else {
                    let a = exponent_f64(&a);
                    atom(if plus {
                        RefAtom::XPlusPow(a)
                    } else {
                        RefAtom::XMinusPow(a)
                    })
                }
            }
            Symbol::X(p) => atom(RefAtom::XNeg(p)),
            Symbol::Xsgn(p) => atom(RefAtom::XNegSgn(p)),
            Symbol::Xi0p(p) => ReferenceDistribution::x_i0(p, true),
            Symbol::Xi0m(p) => ReferenceDistribution::x_i0(p, false),
            Symbol::LnP => atom(RefAtom::LnPlus),
            Symbol::LnM => atom(RefAtom::LnMinus),
            Symbol::LnAbs => atom(RefAtom::LnAbs),
            Symbol::LnSgn => atom(RefAtom::LnSgn),
        },
        Expr::Scale(c, inner) => Ok(to_reference(inner)?.scale(c.to_complex64())),
        Expr::Product(cs) if cs.len() == 1 => to_reference(&cs[0]),
        Expr::Product(_) => Err(Error::Invalid(format!(
            "`{e}` is a product and has no distributional target"
        ))),
        Expr::Sum(cs) => cs.iter().try_fold(ReferenceDistribution::zero(), |acc, c| {
            Ok(acc + to_reference(c)?)
        }),
    }
}
