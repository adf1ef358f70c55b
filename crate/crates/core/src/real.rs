//! Scalar types the numerical kernels are generic over.
//!
//! Everything that evaluates mollifiers, representatives or integrals is
//! written against [`Real`], which is implemented for `f64` and for the
//! double-double type [`Dd`] (about 32 significant digits). The extended type
//! is used for products whose pairings cancel at the `σ⁻³` scale.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};
use std::sync::OnceLock;

use num_traits::{Num, One, Zero};

/// Number of nodes in the Gauss–Legendre panel rule.
pub const GAUSS_POINTS: usize = 8;

pub trait Real:
    Copy
    + Send
    + Sync
    + 'static
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Num
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    /// Unit roundoff of the type.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    fn from_dd(x: Dd) -> Self;
    fn to_f64(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn pi() -> Self;

    /// Gauss–Legendre nodes and weights on `[-1, 1]`, accurate to the
    /// precision of the type.
    fn gauss_legendre() -> &'static [(Self, Self); GAUSS_POINTS];

    /// Bit pattern identifying the value exactly (for memoisation).
    fn key(self) -> (u64, u64);

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }

    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Self::one() / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// `self^a` for `self > 0`.
    fn powf(self, a: f64) -> Self {
        (self.ln() * Self::from_f64(a)).exp()
    }
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn from_dd(x: Dd) -> Self {
        x.hi + x.lo
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    fn key(self) -> (u64, u64) {
        (self.to_bits(), 0)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, a: f64) -> Self {
        f64::powf(self, a)
    }
    fn gauss_legendre() -> &'static [(Self, Self); GAUSS_POINTS] {
        static RULE: OnceLock<[(f64, f64); GAUSS_POINTS]> = OnceLock::new();
        RULE.get_or_init(legendre_rule::<f64>)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

const LN2_DD: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
const PI_DD: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn from_parts(hi: f64, lo: f64) -> Self {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    fn square(self) -> Self {
        let (p1, mut p2) = two_prod(self.hi, self.hi);
        p2 += 2.0 * self.hi * self.lo;
        p2 += self.lo * self.lo;
        Dd::from_parts(p1, p2)
    }

    fn ldexp(self, e: i32) -> Self {
        let s = 2f64.powi(e);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p1, mut p2) = two_prod(self.hi, b);
        p2 += self.lo * b;
        Dd::from_parts(p1, p2)
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&(self.hi + self.lo), f)
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::from_parts(s1, s2 + t2)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, mut p2) = two_prod(self.hi, b.hi);
        p2 += self.hi * b.lo + self.lo * b.hi;
        Dd::from_parts(p1, p2)
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        Dd::from_parts(q1, q2) + Dd::from(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    #[inline]
    fn rem(self, b: Dd) -> Dd {
        let q = (self / b).hi.trunc();
        self - b.mul_f64(q)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Dd {
            #[inline]
            fn $m(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::default(), |a, b| a + b)
    }
}

impl Zero for Dd {
    #[inline]
    fn zero() -> Self {
        Dd::default()
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    #[inline]
    fn one() -> Self {
        Dd::from(1.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dd::from)
    }
}

impl Real for Dd {
    const EPSILON: f64 = 4.93e-32;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd::from(x)
    }
    #[inline]
    fn from_dd(x: Dd) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn key(self) -> (u64, u64) {
        (self.hi.to_bits(), self.lo.to_bits())
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::zero();
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::one();
        }
        let m = (self.hi / LN2_DD.hi + 0.5).floor();
        let r = (self - LN2_DD.mul_f64(m)).ldexp(-9);
        // Taylor series of expm1 on |r| < 7e-4.
        let mut term = r;
        let mut s = r;
        for k in 2..=11 {
            term = term * r / Dd::from(k as f64);
            s += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        for _ in 0..9 {
            s = s.ldexp(1) + s.square();
        }
        (s + Dd::one()).ldexp(m as i32)
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from(f64::NAN);
        }
        if self.hi == 1.0 && self.lo == 0.0 {
            return Dd::zero();
        }
        let x = Dd::from(self.hi.ln());
        x + self * (-x).exp() - Dd::one()
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::zero();
        }
        let q = self.hi.sqrt();
        let (p1, p2) = two_prod(q, q);
        let r = (self - Dd::new(p1, p2)).hi / (2.0 * q);
        Dd::from_parts(q, r)
    }

    fn pi() -> Self {
        PI_DD
    }

    #[inline]
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn gauss_legendre() -> &'static [(Self, Self); GAUSS_POINTS] {
        static RULE: OnceLock<[(Dd, Dd); GAUSS_POINTS]> = OnceLock::new();
        RULE.get_or_init(legendre_rule::<Dd>)
    }
}

/// Legendre polynomial `P_n` and its derivative at `x`.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_f64(k as f64);
        let p2 = ((T::from_f64(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = T::from_f64(n as f64) * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

fn legendre_rule<T: Real>() -> [(T, T); GAUSS_POINTS] {
    let n = GAUSS_POINTS;
    let mut rule = [(T::zero(), T::zero()); GAUSS_POINTS];
    for (i, slot) in rule.iter_mut().enumerate() {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = T::from_f64(guess);
        for _ in 0..12 {
            let (p, dp) = legendre(n, x);
            x -= p / dp;
        }
        let (_, dp) = legendre(n, x);
        let w = T::from_f64(2.0) / ((T::one() - x * x) * dp * dp);
        *slot = (x, w);
    }
    rule
}
