//! Exact functionals `⟨u, ψ⟩` for the distributions used as association targets.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real, Breakpoint, Tolerance};
use crate::representatives::{factorial, harmonic};
use crate::testfn::TestFunction;

/// Highest derivative of `ψ` a reference functional may ask for.
pub const MAX_PSI_ORDER: usize = 4;

/// Relative tolerance of the half-line integrals.
const QUAD_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RefAtom {
    /// `δ⁽ᵏ⁾`.
    Delta(usize),
    /// `x₊^{-p}`, `p ≥ 1`.
    XPlusNeg(usize),
    /// `x₋^{-p}`, `p ≥ 1`.
    XMinusNeg(usize),
    /// `x^{-p} = x₊^{-p} + (-1)^p x₋^{-p}`.
    XNeg(usize),
    /// `x^{-p} sgn x = x₊^{-p} - (-1)^p x₋^{-p}`.
    XNegSgn(usize),
    LnAbs,
    LnPlus,
    LnMinus,
    LnSgn,
    Theta,
    ThetaCheck,
    /// `x₊^a`, `a > -1`.
    XPlusPow(f64),
    /// `x₋^a`, `a > -1`.
    XMinusPow(f64),
    One,
}

impl RefAtom {
    fn validate(&self) -> Result<()> {
        match *self {
            RefAtom::Delta(k) if k > MAX_PSI_ORDER => Err(Error::OrderTooHigh {
                order: k,
                max: MAX_PSI_ORDER,
            }),
            RefAtom::XPlusNeg(p)
            | RefAtom::XMinusNeg(p)
            | RefAtom::XNeg(p)
            | RefAtom::XNegSgn(p) => {
                if p == 0 {
                    Err(Error::Invalid("negative power must have p >= 1".into()))
                } else if p > MAX_PSI_ORDER {
                    Err(Error::OrderTooHigh {
                        order: p,
                        max: MAX_PSI_ORDER,
                    })
                } else {
                    Ok(())
                }
            }
            RefAtom::XPlusPow(a) | RefAtom::XMinusPow(a) if !(a > -1.0) || !a.is_finite() => {
                Err(Error::ExponentTooSmall(a))
            }
            _ => Ok(()),
        }
    }

    /// `(c, v)` with `u(-x) = c · v(x)`.
    pub fn mirrored(&self) -> (f64, RefAtom) {
        let alt = |p: usize| if p.is_multiple_of(2) { 1.0 } else { -1.0 };
        match *self {
            RefAtom::Delta(k) => (alt(k), RefAtom::Delta(k)),
            RefAtom::XPlusNeg(p) => (1.0, RefAtom::XMinusNeg(p)),
            RefAtom::XMinusNeg(p) => (1.0, RefAtom::XPlusNeg(p)),
            RefAtom::XNeg(p) => (alt(p), RefAtom::XNeg(p)),
            RefAtom::XNegSgn(p) => (-alt(p), RefAtom::XNegSgn(p)),
            RefAtom::LnAbs => (1.0, RefAtom::LnAbs),
            RefAtom::LnPlus => (1.0, RefAtom::LnMinus),
            RefAtom::LnMinus => (1.0, RefAtom::LnPlus),
            RefAtom::LnSgn => (-1.0, RefAtom::LnSgn),
            RefAtom::Theta => (1.0, RefAtom::ThetaCheck),
            RefAtom::ThetaCheck => (1.0, RefAtom::Theta),
            RefAtom::XPlusPow(a) => (1.0, RefAtom::XMinusPow(a)),
            RefAtom::XMinusPow(a) => (1.0, RefAtom::XPlusPow(a)),
            RefAtom::One => (1.0, RefAtom::One),
        }
    }
}

impl fmt::Display for RefAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RefAtom::Delta(k) => write!(f, "delta{}", "'".repeat(k)),
            RefAtom::XPlusNeg(p) => write!(f, "x_+^-{p}"),
            RefAtom::XMinusNeg(p) => write!(f, "x_-^-{p}"),
            RefAtom::XNeg(p) => write!(f, "x^-{p}"),
            RefAtom::XNegSgn(p) => write!(f, "x^-{p} sgn x"),
            RefAtom::LnAbs => f.write_str("ln|x|"),
            RefAtom::LnPlus => f.write_str("ln x_+"),
            RefAtom::LnMinus => f.write_str("ln x_-"),
            RefAtom::LnSgn => f.write_str("ln|x| sgn x"),
            RefAtom::Theta => f.write_str("theta"),
            RefAtom::ThetaCheck => f.write_str("theta(-x)"),
            RefAtom::XPlusPow(a) => write!(f, "x_+^{a}"),
            RefAtom::XMinusPow(a) => write!(f, "x_-^{a}"),
            RefAtom::One => f.write_str("1"),
        }
    }
}

/// Finite linear combination of [`RefAtom`]s, each atom appearing once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReferenceDistribution {
    terms: Vec<(Complex64, RefAtom)>,
}

impl ReferenceDistribution {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn atom(a: RefAtom) -> Result<Self> {
        Self::term(Complex64::new(1.0, 0.0), a)
    }

    pub fn term(c: Complex64, a: RefAtom) -> Result<Self> {
        a.validate()?;
        let mut u = Self::zero();
        u.push(c, a);
        Ok(u)
    }

    pub fn delta(k: usize) -> Result<Self> {
        Self::atom(RefAtom::Delta(k))
    }

    pub fn xplus_neg(p: usize) -> Result<Self> {
        Self::atom(RefAtom::XPlusNeg(p))
    }

    pub fn xminus_neg(p: usize) -> Result<Self> {
        Self::atom(RefAtom::XMinusNeg(p))
    }

    pub fn x_neg(p: usize) -> Result<Self> {
        Self::atom(RefAtom::XNeg(p))
    }

    pub fn x_neg_sgn(p: usize) -> Result<Self> {
        Self::atom(RefAtom::XNegSgn(p))
    }

    /// `(x + i0)^{-p}` for `upper`, else `(x - i0)^{-p}`.
    pub fn x_i0(p: usize, upper: bool) -> Result<Self> {
        if p == 0 {
            return Err(Error::Invalid("negative power must have p >= 1".into()));
        }
        let q = p - 1;
        let sign = if upper { -1.0 } else { 1.0 };
        let alt = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = Complex64::new(0.0, sign * alt * PI / factorial(q));
        Ok(Self::x_neg(p)? + Self::term(c, RefAtom::Delta(q))?)
    }

    pub fn terms(&self) -> &[(Complex64, RefAtom)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn push(&mut self, c: Complex64, a: RefAtom) {
        match self.terms.iter().position(|(_, b)| *b == a) {
            Some(i) => {
                self.terms[i].0 += c;
                if self.terms[i].0 == Complex64::new(0.0, 0.0) {
                    self.terms.remove(i);
                }
            }
            None if c != Complex64::new(0.0, 0.0) => self.terms.push((c, a)),
            None => {}
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut u = Self::zero();
        for &(d, a) in &self.terms {
            u.push(c * d, a);
        }
        u
    }

    /// `u(-x)`.
    pub fn mirrored(&self) -> Self {
        let mut u = Self::zero();
        for &(c, a) in &self.terms {
            let (s, m) = a.mirrored();
            u.push(c * s, m);
        }
        u
    }

    /// `⟨u, ψ⟩`.
    pub fn eval(&self, psi: &TestFunction) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(c, a) in &self.terms {
            acc += c * eval_atom(a, psi)?;
        }
        Ok(acc)
    }
}

pub fn eval_reference(u: &ReferenceDistribution, psi: &TestFunction) -> Result<Complex64> {
    u.eval(psi)
}

impl Add for ReferenceDistribution {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        for (c, a) in rhs.terms {
            self.push(c, a);
        }
        self
    }
}

impl Neg for ReferenceDistribution {
    type Output = Self;

    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for ReferenceDistribution {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + -rhs
    }
}

impl Mul<ReferenceDistribution> for Complex64 {
    type Output = ReferenceDistribution;

    fn mul(self, rhs: ReferenceDistribution) -> ReferenceDistribution {
        rhs.scale(self)
    }
}

impl fmt::Display for ReferenceDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, a)) in self.terms.iter().enumerate() {
            let (neg, mag) = if c.im == 0.0 {
                (c.re < 0.0, format_real(c.re.abs()))
            } else if c.re == 0.0 {
                (c.im < 0.0, format!("{}i", format_real(c.im.abs())))
            } else {
                (false, format!("({}{:+}i)", format_real(c.re), c.im))
            };
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if mag != "1" {
                write!(f, "{mag}*")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn format_real(x: f64) -> String {
    if x == x.round() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn psi_derivative(psi: &TestFunction, x: f64, n: usize) -> Result<f64> {
    if n > MAX_PSI_ORDER {
        return Err(Error::OrderTooHigh {
            order: n,
            max: MAX_PSI_ORDER,
        });
    }
    psi.derivative(x, n)
}

/// `∫₀^R g(x) ψ(x) dx` over the right half of the support.
fn half_line(
    psi: &TestFunction,
    g: impl Fn(f64) -> f64,
    n: usize,
    sing: Breakpoint<f64>,
) -> Result<f64> {
    let r = psi.support_radius();
    let res = integrate_real(
        |x| g(x) * psi.derivative_unchecked(x, n),
        0.0,
        r,
        &[sing],
        Tolerance::relative(QUAD_TOL),
    )?;
    Ok(res.value)
}

/// Principal-part formula for `x₊^{-p-1}`:
/// `-(1/p!)∫₀^∞ ln x ψ^{(p+1)} dx + κ_p ψ^{(p)}(0)/p!`.
fn xplus_neg(p1: usize, psi: &TestFunction) -> Result<f64> {
    let p = p1 - 1;
    psi_derivative(psi, 0.0, p1)?;
    let kappa = harmonic(p);
    let kappa = *kappa.numer() as f64 / *kappa.denom() as f64;
    let integral = half_line(psi, f64::ln, p1, Breakpoint::log(0.0))?;
    Ok((-integral + kappa * psi_derivative(psi, 0.0, p)?) / factorial(p))
}

fn eval_atom(a: RefAtom, psi: &TestFunction) -> Result<f64> {
    a.validate()?;
    let m = || psi.mirrored();
    let alt = |p: usize| if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(match a {
        RefAtom::Delta(k) => alt(k) * psi_derivative(psi, 0.0, k)?,
        RefAtom::XPlusNeg(p) => xplus_neg(p, psi)?,
        RefAtom::XMinusNeg(p) => xplus_neg(p, &m())?,
        RefAtom::XNeg(p) => xplus_neg(p, psi)? + alt(p) * xplus_neg(p, &m())?,
        RefAtom::XNegSgn(p) => xplus_neg(p, psi)? - alt(p) * xplus_neg(p, &m())?,
        RefAtom::LnPlus => half_line(psi, f64::ln, 0, Breakpoint::log(0.0))?,
        RefAtom::LnMinus => half_line(&m(), f64::ln, 0, Breakpoint::log(0.0))?,
        RefAtom::LnAbs => eval_atom(RefAtom::LnPlus, psi)? + eval_atom(RefAtom::LnMinus, psi)?,
        RefAtom::LnSgn => eval_atom(RefAtom::LnPlus, psi)? - eval_atom(RefAtom::LnMinus, psi)?,
        RefAtom::Theta => half_line(psi, |_| 1.0, 0, Breakpoint::regular(0.0))?,
        RefAtom::ThetaCheck => half_line(&m(), |_| 1.0, 0, Breakpoint::regular(0.0))?,
        RefAtom::XPlusPow(e) => half_line(psi, |x| x.powf(e), 0, pow_breakpoint(e))?,
        RefAtom::XMinusPow(e) => half_line(&m(), |x| x.powf(e), 0, pow_breakpoint(e))?,
        RefAtom::One => eval_atom(RefAtom::Theta, psi)? + eval_atom(RefAtom::ThetaCheck, psi)?,
    })
}

fn pow_breakpoint(a: f64) -> Breakpoint<f64> {
    if a.fract() == 0.0 {
        Breakpoint::regular(0.0)
    } else {
        Breakpoint::algebraic(0.0, a)
    }
}
