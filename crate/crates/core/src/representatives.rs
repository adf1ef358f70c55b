//! σ-parameterised representatives of the modelled singular distributions.
//!
//! Every convolution `u ∗ K_σ`, `K_σ(x) = σ⁻¹ K(x/σ)`, is evaluated in the
//! scaled variable `w = x/σ`. For the `+` atoms:
//!
//! | atom | value at `w` |
//! |---|---|
//! | `D⁽ᵖ⁾` | `σ^{-p-1} K⁽ᵖ⁾(w)` |
//! | `H` | `∫_{-∞}^{w} K` |
//! | `X₊^a` | `σ^a ∫_{-∞}^{w} (w-u)^a K(u) du` |
//! | `Ln x₊` | `ln σ · H(w) + ∫₀ ln d · K(w-d) dd` |
//! | `X₊^{-p-1}` | `(-1)^p/(p! σ^{p+1}) [(ln σ + κ_p) K⁽ᵖ⁾(w) + ∫₀ ln d · K⁽ᵖ⁺¹⁾(w-d) dd]` |
//!
//! The log singularity sits at `d = 0` exactly. Beyond the kernel support
//! (`w > l`) the `+` atoms are ordinary convolutions of smooth functions and
//! are integrated directly in `u`, which avoids cancellation for large `w`.
//! `−` atoms use the mirrored kernel `K(-u)` evaluated at `-w`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::mollifier::{binomial, Kernel, Mollifier, MAX_MOMENT, MAX_ORDER};
use crate::quadrature::{integrate_vec, Breakpoint, QuadError, Tolerance, DEFAULT_MAX_PANELS};
use crate::real::{Dd, Real};
use crate::testfn::TestFunction;

/// Default relative (L1) tolerance of a pairing.
pub const DEFAULT_PAIR_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// `D⁽ᵖ⁾`, model of `δ⁽ᵖ⁾`.
    Delta(usize),
    /// `H` (or `Ȟ` when checked), model of `θ` (`θ(-x)`).
    Heaviside { checked: bool },
    /// `X±^a`, `a > -1`.
    XPower { sign: Sign, a: f64 },
    /// `Ln x±`.
    Ln(Sign),
    /// `X±^{-p-1}`.
    XNegInt { sign: Sign, p: usize },
}

/// Expression tree of a representative.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Atom(Atom),
    Scale(Complex<Dd>, Box<Node>),
    Sum(Vec<Node>),
    Product(Vec<Node>),
}

/// Where a representative may be non-zero, in units of `lσ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    /// Vanishes for `x < -lσ`.
    pub left_bounded: bool,
    /// Vanishes for `x > lσ`.
    pub right_bounded: bool,
}

impl Support {
    pub const COMPACT: Support = Support {
        left_bounded: true,
        right_bounded: true,
    };
    pub const RIGHT_HALF: Support = Support {
        left_bounded: true,
        right_bounded: false,
    };
    pub const LEFT_HALF: Support = Support {
        left_bounded: false,
        right_bounded: true,
    };
    pub const GLOBAL: Support = Support {
        left_bounded: false,
        right_bounded: false,
    };

    pub fn intersect(self, o: Support) -> Support {
        Support {
            left_bounded: self.left_bounded || o.left_bounded,
            right_bounded: self.right_bounded || o.right_bounded,
        }
    }

    pub fn union(self, o: Support) -> Support {
        Support {
            left_bounded: self.left_bounded && o.left_bounded,
            right_bounded: self.right_bounded && o.right_bounded,
        }
    }

    /// Interval `[lo, hi]` for kernel radius `l` at `σ`; `None` is unbounded.
    pub fn interval(self, l: f64, sigma: f64) -> (Option<f64>, Option<f64>) {
        (
            self.left_bounded.then_some(-l * sigma),
            self.right_bounded.then_some(l * sigma),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CostHint {
    ClosedForm,
    SingleIntegral,
    NestedIntegral,
}

/// `κ_p = Σ_{k=1}^{p} 1/k`, exactly.
pub fn harmonic(p: usize) -> Ratio<i64> {
    (1..=p as i64).fold(Ratio::zero(), |acc, k| acc + Ratio::new(1, k))
}

pub(crate) fn factorial(p: usize) -> f64 {
    (1..=p).fold(1.0, |a, k| a * k as f64)
}

impl Atom {
    pub fn support(&self) -> Support {
        match self {
            Atom::Delta(_) => Support::COMPACT,
            Atom::Heaviside { checked: false } => Support::RIGHT_HALF,
            Atom::Heaviside { checked: true } => Support::LEFT_HALF,
            Atom::XPower { sign, .. } | Atom::Ln(sign) | Atom::XNegInt { sign, .. } => match sign {
                Sign::Plus => Support::RIGHT_HALF,
                Sign::Minus => Support::LEFT_HALF,
            },
        }
    }

    pub fn cost(&self) -> CostHint {
        match self {
            Atom::Delta(_) | Atom::Heaviside { .. } => CostHint::ClosedForm,
            Atom::XPower { a, .. } if a.fract() == 0.0 => CostHint::ClosedForm,
            Atom::XNegInt { .. } => CostHint::NestedIntegral,
            _ => CostHint::SingleIntegral,
        }
    }

    /// The same atom after `x ↦ -x`, with the scalar factor picked up.
    pub fn mirrored(&self) -> (f64, Atom) {
        match *self {
            Atom::Delta(p) => (if p % 2 == 0 { 1.0 } else { -1.0 }, Atom::Delta(p)),
            Atom::Heaviside { checked } => (1.0, Atom::Heaviside { checked: !checked }),
            Atom::XPower { sign, a } => (
                1.0,
                Atom::XPower {
                    sign: sign.flip(),
                    a,
                },
            ),
            Atom::Ln(sign) => (1.0, Atom::Ln(sign.flip())),
            Atom::XNegInt { sign, p } => (
                1.0,
                Atom::XNegInt {
                    sign: sign.flip(),
                    p,
                },
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Atom::Delta(p) if p + 1 > MAX_ORDER => Err(Error::OrderTooHigh {
                order: p,
                max: MAX_ORDER - 1,
            }),
            Atom::XNegInt { p, .. } if p + 2 > MAX_ORDER => Err(Error::OrderTooHigh {
                order: p + 1,
                max: MAX_ORDER - 1,
            }),
            Atom::XPower { a, .. } if !(a > -1.0) || !a.is_finite() => {
                Err(Error::ExponentTooSmall(a))
            }
            Atom::XPower { a, .. } if a.fract() == 0.0 && a > MAX_MOMENT as f64 => Err(
                Error::Invalid(format!("integer power {a} exceeds {MAX_MOMENT}")),
            ),
            _ => Ok(()),
        }
    }
}

impl Node {
    pub fn support(&self) -> Support {
        match self {
            Node::Atom(a) => a.support(),
            Node::Scale(_, c) => c.support(),
            Node::Sum(cs) => cs
                .iter()
                .map(Node::support)
                .fold(Support::COMPACT, Support::union),
            Node::Product(cs) => cs
                .iter()
                .map(Node::support)
                .fold(Support::GLOBAL, Support::intersect),
        }
    }

    pub fn cost(&self) -> CostHint {
        match self {
            Node::Atom(a) => a.cost(),
            Node::Scale(_, c) => c.cost(),
            Node::Sum(cs) | Node::Product(cs) => cs
                .iter()
                .map(Node::cost)
                .max()
                .unwrap_or(CostHint::ClosedForm),
        }
    }

    /// Tree after `x ↦ -x`.
    pub fn mirrored(&self) -> Node {
        match self {
            Node::Atom(a) => {
                let (s, m) = a.mirrored();
                if s == 1.0 {
                    Node::Atom(m)
                } else {
                    Node::Scale(
                        Complex::new(Dd::from(s), Dd::zero()),
                        Box::new(Node::Atom(m)),
                    )
                }
            }
            Node::Scale(c, n) => Node::Scale(*c, Box::new(n.mirrored())),
            Node::Sum(cs) => Node::Sum(cs.iter().map(Node::mirrored).collect()),
            Node::Product(cs) => Node::Product(cs.iter().map(Node::mirrored).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Node::Atom(a) => a.validate(),
            Node::Scale(_, c) => c.validate(),
            Node::Sum(cs) | Node::Product(cs) => {
                if cs.is_empty() {
                    return Err(Error::EmptyProduct);
                }
                cs.iter().try_for_each(Node::validate)
            }
        }
    }
}

/// A representative: expression tree plus the mollifier it convolves with.
#[derive(Clone, Debug, PartialEq)]
pub struct Representative {
    node: Node,
    mollifier: Mollifier,
}

pub fn rep_delta(m: &Mollifier, p: usize) -> Result<Representative> {
    Representative::atom(m, Atom::Delta(p))
}

pub fn rep_heaviside(m: &Mollifier, checked: bool) -> Result<Representative> {
    Representative::atom(m, Atom::Heaviside { checked })
}

pub fn rep_x_power(m: &Mollifier, sign: Sign, a: f64) -> Result<Representative> {
    Representative::atom(m, Atom::XPower { sign, a })
}

pub fn rep_ln(m: &Mollifier, sign: Sign) -> Result<Representative> {
    Representative::atom(m, Atom::Ln(sign))
}

/// Model of `x±^{-p-1}`.
pub fn rep_x_neg_int(m: &Mollifier, sign: Sign, p: usize) -> Result<Representative> {
    Representative::atom(m, Atom::XNegInt { sign, p })
}

/// Composite singular functions expanded into `±` atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derived {
    /// `x^{-p} = x₊^{-p} + (-1)^p x₋^{-p}`.
    XNeg,
    /// `x^{-p} sgn x = x₊^{-p} - (-1)^p x₋^{-p}`.
    XNegSgn,
    /// `(x + i0)^{-p} = x^{-p} - ((-1)^{p-1} iπ/(p-1)!) δ^{(p-1)}`.
    XPlusI0,
    /// `(x - i0)^{-p} = x^{-p} + ((-1)^{p-1} iπ/(p-1)!) δ^{(p-1)}`.
    XMinusI0,
    /// `ln|x| = ln x₊ + ln x₋`.
    LnAbs,
    /// `ln|x| sgn x = ln x₊ - ln x₋`.
    LnSgn,
}

/// Builds the node of a derived function; `p` is the (positive) power for
/// the `x^{-p}` families and ignored for the logarithms.
pub fn derived_node(which: Derived, p: usize) -> Result<Node> {
    let c = |v: f64| Complex::new(Dd::from(v), Dd::zero());
    let scale = |k: Complex<Dd>, n: Node| {
        if k == Complex::new(Dd::one(), Dd::zero()) {
            n
        } else {
            Node::Scale(k, Box::new(n))
        }
    };
    let neg = |sign| -> Result<Node> {
        if p == 0 {
            return Err(Error::Invalid("negative power must be at least 1".into()));
        }
        Ok(Node::Atom(Atom::XNegInt { sign, p: p - 1 }))
    };
    let parity = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(match which {
        Derived::XNeg => Node::Sum(vec![neg(Sign::Plus)?, scale(c(parity), neg(Sign::Minus)?)]),
        Derived::XNegSgn => Node::Sum(vec![neg(Sign::Plus)?, scale(c(-parity), neg(Sign::Minus)?)]),
        Derived::XPlusI0 | Derived::XMinusI0 => {
            let q = p
                .checked_sub(1)
                .ok_or_else(|| Error::Invalid("negative power must be at least 1".into()))?;
            // (x ± i0)^{-q-1} = x^{-q-1} ∓ ((-1)^q iπ / q!) δ^{(q)}
            let upper = if which == Derived::XPlusI0 { -1.0 } else { 1.0 };
            let qpar = if q % 2 == 0 { 1.0 } else { -1.0 };
            let k = Complex::new(
                Dd::zero(),
                Dd::pi() * Dd::from(upper * qpar) / Dd::from(factorial(q)),
            );
            Node::Sum(vec![
                derived_node(Derived::XNeg, p)?,
                Node::Scale(k, Box::new(Node::Atom(Atom::Delta(q)))),
            ])
        }
        Derived::LnAbs => Node::Sum(vec![
            Node::Atom(Atom::Ln(Sign::Plus)),
            Node::Atom(Atom::Ln(Sign::Minus)),
        ]),
        Derived::LnSgn => Node::Sum(vec![
            Node::Atom(Atom::Ln(Sign::Plus)),
            scale(c(-1.0), Node::Atom(Atom::Ln(Sign::Minus))),
        ]),
    })
}

pub fn rep_derived(m: &Mollifier, which: Derived, p: usize) -> Result<Representative> {
    Representative::new(m, derived_node(which, p)?)
}

/// Pointwise product of representatives sharing one mollifier, times `coeff`.
pub fn product(reps: &[Representative], coeff: Complex<Dd>) -> Result<Representative> {
    let first = reps.first().ok_or(Error::EmptyProduct)?;
    if reps.iter().any(|r| r.mollifier != first.mollifier) {
        return Err(Error::Invalid(
            "representatives use different mollifiers".into(),
        ));
    }
    let node = if reps.len() == 1 {
        first.node.clone()
    } else {
        Node::Product(reps.iter().map(|r| r.node.clone()).collect())
    };
    let node = if coeff == Complex::new(Dd::one(), Dd::zero()) {
        node
    } else {
        Node::Scale(coeff, Box::new(node))
    };
    Ok(Representative {
        node,
        mollifier: first.mollifier.clone(),
    })
}

impl Representative {
    pub fn new(m: &Mollifier, node: Node) -> Result<Self> {
        node.validate()?;
        Ok(Representative {
            node,
            mollifier: m.clone(),
        })
    }

    fn atom(m: &Mollifier, a: Atom) -> Result<Self> {
        Self::new(m, Node::Atom(a))
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn support(&self) -> Support {
        self.node.support()
    }

    pub fn cost_hint(&self) -> CostHint {
        self.node.cost()
    }

    /// Points where the integrand definition changes: `σ` times the
    /// kernel breakpoints (both orientations) and the origin.
    pub fn singular_points(&self, sigma: f64) -> Vec<f64> {
        let k: Kernel<f64> = match self.mollifier.kernel(sigma, false) {
            Ok(k) => k,
            Err(_) => return vec![0.0],
        };
        let mut pts: Vec<f64> = k
            .breakpoints()
            .iter()
            .flat_map(|&b| [b * sigma, -b * sigma])
            .chain([0.0])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn scaled(&self, c: Complex<Dd>) -> Representative {
        Representative {
            node: Node::Scale(c, Box::new(self.node.clone())),
            mollifier: self.mollifier.clone(),
        }
    }

    pub fn add(&self, other: &Representative) -> Result<Representative> {
        if self.mollifier != other.mollifier {
            return Err(Error::Invalid(
                "representatives use different mollifiers".into(),
            ));
        }
        Ok(Representative {
            node: Node::Sum(vec![self.node.clone(), other.node.clone()]),
            mollifier: self.mollifier.clone(),
        })
    }

    pub fn mirrored(&self) -> Representative {
        Representative {
            node: self.node.mirrored(),
            mollifier: self.mollifier.clone(),
        }
    }

    /// Prepares evaluation at a fixed `σ`; inner integrals use relative
    /// tolerance `tol`.
    pub fn bind<'a, T: Real>(
        &'a self,
        sigma: T,
        tol: f64,
        cache: &'a PairCache<T>,
    ) -> Result<Bound<'a, T>> {
        Bound::new(self, sigma, tol, cache)
    }

    /// One-off evaluation at `(σ, x)`.
    pub fn eval<T: Real>(&self, sigma: T, x: T) -> Result<Complex<T>> {
        let cache = PairCache::new();
        let b = self.bind(sigma, DEFAULT_PAIR_TOL / 10.0, &cache)?;
        let v = b.eval(x);
        b.finish()?;
        Ok(v)
    }
}

/// Inner-integral weight.
#[derive(Clone, Copy)]
enum Weight {
    Ln,
    Pow(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CoreKey {
    kind: u8,
    param: u64,
    mirrored: bool,
    w: (u64, u64),
}

/// Memo of σ-independent inner integrals, keyed by atom, orientation and
/// scaled abscissa. Valid for one representative and one tolerance; the
/// σ-sweep reuses it because panels in `x` are `σ`-scaled copies of each
/// other.
pub struct PairCache<T> {
    map: RefCell<HashMap<CoreKey, Rc<[T]>>>,
}

impl<T> Default for PairCache<T> {
    fn default() -> Self {
        PairCache {
            map: RefCell::new(HashMap::new()),
        }
    }
}

impl<T> PairCache<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A representative with its kernels fixed at one `σ`.
pub struct Bound<'a, T: Real> {
    rep: &'a Representative,
    cache: &'a PairCache<T>,
    sigma: T,
    w_scale: T,
    ln_sigma: T,
    l: T,
    /// `σ^{-k}` for `k = 0..=MAX_ORDER + 1`.
    inv_pow: Vec<T>,
    k: Kernel<T>,
    km: Kernel<T>,
    tol: Tolerance,
    error: RefCell<Option<Error>>,
}

impl<'a, T: Real> Bound<'a, T> {
    fn new(rep: &'a Representative, sigma: T, tol: f64, cache: &'a PairCache<T>) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::NonPositiveSigma(sigma.to_f64()));
        }
        let k = rep.mollifier.kernel(sigma, false)?;
        let km = rep.mollifier.kernel(sigma, true)?;
        let inv = T::one() / sigma;
        let mut inv_pow = vec![T::one()];
        for i in 1..=MAX_ORDER + 1 {
            let prev = inv_pow[i - 1];
            inv_pow.push(prev * inv);
        }
        Ok(Bound {
            rep,
            cache,
            sigma,
            w_scale: inv,
            ln_sigma: sigma.ln(),
            l: T::from_f64(rep.mollifier.radius()),
            inv_pow,
            k,
            km,
            // Kernel values are O(1), so an absolute floor at that scale
            // stops refinement on integrals that are negligibly small.
            tol: Tolerance {
                abs: tol * 1e-3,
                rel: tol,
            },
            error: RefCell::new(None),
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Reports the first inner-quadrature failure, if any.
    pub fn finish(&self) -> Result<()> {
        match self.error.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn eval(&self, x: T) -> Complex<T> {
        self.eval_node(&self.rep.node, x)
    }

    fn inside(&self, s: Support, x: T) -> bool {
        let edge = self.l * self.sigma;
        !(s.left_bounded && x < -edge) && !(s.right_bounded && x > edge)
    }

    fn eval_node(&self, node: &Node, x: T) -> Complex<T> {
        match node {
            Node::Atom(a) => self.eval_atom(a, x),
            Node::Scale(c, n) => {
                let v = self.eval_node(n, x);
                if v.is_zero() {
                    return v;
                }
                Complex::new(T::from_dd(c.re), T::from_dd(c.im)) * v
            }
            Node::Sum(cs) => cs
                .iter()
                .fold(Complex::zero(), |acc, c| acc + self.eval_node(c, x)),
            Node::Product(cs) => {
                if cs.iter().any(|c| !self.inside(c.support(), x)) {
                    return Complex::zero();
                }
                let mut acc = Complex::one();
                for c in cs {
                    let v = self.eval_node(c, x);
                    if v.is_zero() {
                        return v;
                    }
                    acc = acc * v;
                }
                acc
            }
        }
    }

    fn eval_atom(&self, a: &Atom, x: T) -> Complex<T> {
        let w = x * self.w_scale;
        let (kernel, w, mirrored) = match *a {
            Atom::Delta(_) => (&self.k, w, false),
            Atom::Heaviside { checked } => self.oriented(checked, w),
            Atom::XPower { sign, .. } | Atom::Ln(sign) | Atom::XNegInt { sign, .. } => {
                self.oriented(sign == Sign::Minus, w)
            }
        };
        if let Atom::Delta(p) = *a {
            return kernel.eval(w, p) * self.inv_pow[p + 1];
        }
        if !(w > -self.l) {
            return Complex::zero();
        }
        let outer = w > self.l;
        let core = self.core(a, kernel, w, mirrored, outer);
        let parts = kernel.parts();
        let n = parts.len();
        let mix = |offset: usize| -> Complex<T> {
            parts
                .iter()
                .enumerate()
                .fold(Complex::zero(), |acc, (i, (_, wt))| {
                    acc + *wt * core[offset * n + i]
                })
        };
        match *a {
            Atom::Delta(_) => unreachable!(),
            Atom::Heaviside { .. } => mix(0),
            Atom::XPower { a, .. } => mix(0) * self.sigma.powf(a),
            Atom::Ln(_) => mix(0) * self.ln_sigma + mix(1),
            Atom::XNegInt { p, .. } => {
                if outer {
                    mix(0) * self.inv_pow[p + 1]
                } else {
                    let kappa = harmonic(p);
                    let kappa =
                        T::from_f64(*kappa.numer() as f64) / T::from_f64(*kappa.denom() as f64);
                    let sign = if p % 2 == 0 { T::one() } else { -T::one() };
                    let pre = sign * self.inv_pow[p + 1] / T::from_f64(factorial(p));
                    (mix(0) * (self.ln_sigma + kappa) + mix(1)) * pre
                }
            }
        }
    }

    fn oriented(&self, minus: bool, w: T) -> (&Kernel<T>, T, bool) {
        if minus {
            (&self.km, -w, true)
        } else {
            (&self.k, w, false)
        }
    }

    /// σ-independent values per kernel part: `[c0 for each part, c1 for each part]`.
    fn core(&self, a: &Atom, k: &Kernel<T>, w: T, mirrored: bool, outer: bool) -> Rc<[T]> {
        let (kind, param) = match *a {
            Atom::Delta(p) => (0, p as u64),
            Atom::Heaviside { .. } => (1, 0),
            Atom::XPower { a, .. } => (2, a.to_bits()),
            Atom::Ln(_) => (3, 0),
            Atom::XNegInt { p, .. } => (4, p as u64),
        };
        let key = CoreKey {
            kind,
            param,
            mirrored,
            w: w.key(),
        };
        if let Some(v) = self.cache.map.borrow().get(&key) {
            return v.clone();
        }
        let parts = k.parts();
        let n = parts.len();
        let mut out = vec![T::zero(); 2 * n];
        let heaviside = |out: &mut [T]| {
            for (i, (b, _)) in parts.iter().enumerate() {
                out[i] = if !(w < self.l) {
                    T::from_dd(b.moment(0))
                } else if w > T::zero() {
                    T::from_dd(b.moment(0)) - b.upper_moment(0, w)
                } else {
                    b.partial_moment(0, w)
                };
            }
        };
        match *a {
            Atom::Delta(_) => unreachable!("delta needs no core"),
            Atom::Heaviside { .. } => heaviside(&mut out),
            Atom::XPower { a, .. } => {
                if a == 0.0 {
                    heaviside(&mut out);
                } else if a.fract() == 0.0 {
                    let m = a as usize;
                    for (i, (b, _)) in parts.iter().enumerate() {
                        let mut acc = T::zero();
                        for j in 0..=m {
                            let pm = if w < self.l {
                                b.partial_moment(j, w)
                            } else {
                                T::from_dd(b.moment(j))
                            };
                            let s = if j % 2 == 0 { T::one() } else { -T::one() };
                            acc += T::from_f64(binomial(m, j)) * s * w.powi((m - j) as i32) * pm;
                        }
                        out[i] = acc;
                    }
                } else {
                    let v = self.conv(k, w, 0, Weight::Pow(a), outer);
                    out[..n].copy_from_slice(&v);
                }
            }
            Atom::Ln(_) => {
                heaviside(&mut out);
                let v = self.conv(k, w, 0, Weight::Ln, outer);
                out[n..].copy_from_slice(&v);
            }
            Atom::XNegInt { p, .. } => {
                if outer {
                    let v = self.conv(k, w, 0, Weight::Pow(-((p + 1) as f64)), true);
                    out[..n].copy_from_slice(&v);
                } else {
                    for (i, (b, _)) in parts.iter().enumerate() {
                        out[i] = b.eval(w, p);
                    }
                    let v = self.conv(k, w, p + 1, Weight::Ln, false);
                    out[n..].copy_from_slice(&v);
                }
            }
        }
        let out: Rc<[T]> = out.into();
        self.cache.map.borrow_mut().insert(key, out.clone());
        out
    }

    fn weight(wt: Weight, d: T) -> T {
        match wt {
            Weight::Ln => d.ln(),
            Weight::Pow(a) => {
                if a.fract() == 0.0 {
                    d.powi(a as i32)
                } else {
                    d.powf(a)
                }
            }
        }
    }

    /// Per part: `∫₀^{w+l} g(d) Kᵢ⁽ⁿ⁾(w-d) dd` with the singular endpoint at
    /// `d = 0`, or for `w > l` the regular `∫_{-l}^{l} g(w-u) Kᵢ⁽ⁿ⁾(u) du`.
    fn conv(&self, k: &Kernel<T>, w: T, n: usize, wt: Weight, outer: bool) -> Vec<T> {
        let parts = k.parts();
        let np = parts.len();
        let (a, b, bps) = if outer {
            let bps: Vec<Breakpoint<T>> = k
                .breakpoints()
                .iter()
                .map(|&b| Breakpoint::regular(T::from_f64(b)))
                .collect();
            (-self.l, self.l, bps)
        } else {
            let hi = w + self.l;
            let sing = match wt {
                Weight::Ln => Breakpoint::log(T::zero()),
                Weight::Pow(a) => Breakpoint::algebraic(T::zero(), a),
            };
            let mut bps = vec![sing];
            for &b in k.breakpoints() {
                let d = w - T::from_f64(b);
                if d > T::zero() && d < hi {
                    bps.push(Breakpoint::regular(d));
                }
            }
            (T::zero(), hi, bps)
        };
        let r = integrate_vec(
            |t: T, out: &mut [Complex<T>]| {
                let (u, d) = if outer { (t, w - t) } else { (w - t, t) };
                let mut g: Option<T> = None;
                for (o, (part, _)) in out.iter_mut().zip(parts) {
                    let kv = part.eval(u, n);
                    if !kv.is_zero() {
                        let gv = *g.get_or_insert_with(|| Self::weight(wt, d));
                        *o = Complex::new(kv * gv, T::zero());
                    }
                }
            },
            np,
            a,
            b,
            &bps,
            self.tol,
            DEFAULT_MAX_PANELS,
        );
        match r {
            Ok(r) => r.value.iter().map(|c| c.re).collect(),
            Err(e) => {
                let best = match &e {
                    QuadError::MaxPanels { best, .. } => {
                        best.iter().map(|c| T::from_f64(c.re)).collect()
                    }
                    _ => vec![T::from_f64(f64::NAN); np],
                };
                let mut slot = self.error.borrow_mut();
                if slot.is_none() {
                    *slot = Some(Error::Quadrature(e));
                }
                best
            }
        }
    }
}

/// Result of pairing one representative with one test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pairing<T> {
    pub value: Complex<T>,
    pub error_estimate: f64,
}

/// `∫ rep(σ,x) ψⱼ(x) dx` for each test function, sharing evaluations of the
/// representative. `tol` is relative to `∫|rep ψ|`; inner integrals use
/// `tol/10`.
pub fn pair_many<T: Real>(
    rep: &Representative,
    psis: &[TestFunction],
    sigma: T,
    tol: f64,
) -> Result<Vec<Pairing<T>>> {
    pair_many_cached(rep, psis, sigma, tol, &PairCache::new())
}

/// [`pair_many`] reusing inner integrals memoised in `cache`, which must
/// only ever be used with this representative and tolerance.
pub fn pair_many_cached<T: Real>(
    rep: &Representative,
    psis: &[TestFunction],
    sigma: T,
    tol: f64,
    cache: &PairCache<T>,
) -> Result<Vec<Pairing<T>>> {
    let bound = rep.bind(sigma, tol / 10.0, cache)?;
    let s = sigma.to_f64();
    let l = rep.mollifier.radius();
    let r = psis.iter().map(|p| p.support_radius()).fold(0.0, f64::max);
    let (lo, hi) = rep.support().interval(l, s);
    let a = lo.map_or(-r, |v| v.max(-r));
    let b = hi.map_or(r, |v| v.min(r));
    if !(a < b) {
        return Ok(vec![
            Pairing {
                value: Complex::zero(),
                error_estimate: 0.0,
            };
            psis.len()
        ]);
    }
    let bps: Vec<Breakpoint<T>> = rep
        .singular_points(s)
        .into_iter()
        .filter(|&p| p > a && p < b)
        .map(|p| Breakpoint::regular(T::from_f64(p)))
        .collect();
    let res = integrate_vec(
        |x: T, out: &mut [Complex<T>]| {
            let v = bound.eval(x);
            if v.is_zero() {
                return;
            }
            for (o, psi) in out.iter_mut().zip(psis) {
                *o = v * psi.eval(x);
            }
        },
        psis.len(),
        T::from_f64(a),
        T::from_f64(b),
        &bps,
        Tolerance::relative(tol),
        DEFAULT_MAX_PANELS,
    )?;
    bound.finish()?;
    // inner integrals run at tol/10 relative to the same scale
    let inner = if rep.cost_hint() > CostHint::ClosedForm {
        0.1 * tol * res.l1
    } else {
        0.0
    };
    let err = res.error_estimate + inner;
    Ok(res
        .value
        .into_iter()
        .map(|value| Pairing {
            value,
            error_estimate: err,
        })
        .collect())
}

pub fn pair<T: Real>(
    rep: &Representative,
    psi: &TestFunction,
    sigma: T,
    tol: f64,
) -> Result<Pairing<T>> {
    Ok(pair_many(rep, std::slice::from_ref(psi), sigma, tol)?[0])
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}
