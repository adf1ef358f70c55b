//! Bump kernels and the mollifiers built from them.
//!
//! The standard bump is `b(t) = exp(-1/(1-t²))` on `(-1, 1)`. Its derivatives
//! are `b⁽ⁿ⁾(t) = Pₙ(t) (1-t²)^{-2n} b(t)` with integer polynomials generated by
//! `Pₙ₊₁ = q² Pₙ' + (4n t q - 2t) Pₙ`, `q = 1 - t²`, so every derivative is
//! evaluated in closed form.
//!
//! [`ModelMollifier`] is `D(σ,u) = f(u) + λ(σ) g(u)` with `∫f = 1`, `∫g = 0`
//! and `λ(σ)² = (σ - ∫f²)/∫g²`, which gives `∫D = 1` and `∫D² = σ`. Below
//! `σ = ∫f²` the root is imaginary and `D` is complex valued.
//!
//! [`MomentMollifier`] is a combination of bumps whose moments `1..=q` vanish.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real, Tolerance};
use crate::real::{Dd, Real};

/// Highest derivative order available in closed form.
pub const MAX_ORDER: usize = 8;

/// Highest power `k` for which partial moments `∫ u^k K` are tabulated.
pub const MAX_MOMENT: usize = 6;

/// Reciprocal of `1-t²` beyond which every derivative is below `1e-200`.
const CUTOFF: f64 = 600.0;

const TABLE_NODES: usize = 128;

fn bump_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<i128>> = vec![vec![1]];
        for n in 0..MAX_ORDER {
            let p = &polys[n];
            let deriv: Vec<i128> = (1..p.len()).map(|k| k as i128 * p[k]).collect();
            let q2 = [1i128, 0, -2, 0, 1];
            let mut next = vec![0i128; p.len() + 4];
            for (i, &d) in deriv.iter().enumerate() {
                for (j, &c) in q2.iter().enumerate() {
                    next[i + j] += d * c;
                }
            }
            // (4n t q - 2t) = (4n - 2) t - 4n t³
            let n = n as i128;
            for (i, &c) in p.iter().enumerate() {
                next[i + 1] += (4 * n - 2) * c;
                next[i + 3] -= 4 * n * c;
            }
            while next.len() > 1 && *next.last().unwrap() == 0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
            .into_iter()
            .map(|p| p.into_iter().map(|c| c as f64).collect())
            .collect()
    })
}

/// `b⁽ⁿ⁾(t)` for the standard bump; zero outside `(-1, 1)`.
pub fn bump_derivative<T: Real>(t: T, n: usize) -> T {
    let one = T::one();
    if !(t > -one && t < one) {
        return T::zero();
    }
    let q = (one - t) * (one + t);
    let inv = one / q;
    if inv.to_f64() > CUTOFF {
        return T::zero();
    }
    let e = (-inv).exp();
    if n == 0 {
        return e;
    }
    let poly = &bump_polys()[n];
    let mut acc = T::zero();
    for &c in poly.iter().rev() {
        acc = acc * t + T::from_f64(c);
    }
    acc * inv.powi(2 * n as i32) * e
}

/// `∫_{-1}^{τ} t^j b(t) dt` at equally spaced nodes, in double-double.
fn canonical_table() -> &'static [Vec<Dd>] {
    static TABLE: OnceLock<Vec<Vec<Dd>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / TABLE_NODES as f64;
        (0..=MAX_MOMENT)
            .map(|j| {
                let mut col = Vec::with_capacity(TABLE_NODES + 1);
                let mut acc = Dd::zero();
                col.push(acc);
                for i in 0..TABLE_NODES {
                    let a = Dd::from(-1.0 + i as f64 * h);
                    let b = Dd::from(-1.0 + (i + 1) as f64 * h);
                    let r = integrate_real(
                        |t: Dd| t.powi(j as i32) * bump_derivative(t, 0),
                        a,
                        b,
                        &[],
                        Tolerance::absolute(1e-33),
                    );
                    acc += match r {
                        Ok(r) => r.value,
                        Err(e) => panic!("bump table quadrature failed: {e}"),
                    };
                    col.push(acc);
                }
                col
            })
            .collect()
    })
}

/// `∫_{-1}^{1} b(t)² dt` in double-double.
fn canonical_square() -> Dd {
    static SQ: OnceLock<Dd> = OnceLock::new();
    *SQ.get_or_init(|| {
        let h = 2.0 / TABLE_NODES as f64;
        (0..TABLE_NODES)
            .map(|i| {
                integrate_real(
                    |t: Dd| {
                        let b = bump_derivative(t, 0);
                        b * b
                    },
                    Dd::from(-1.0 + i as f64 * h),
                    Dd::from(-1.0 + (i + 1) as f64 * h),
                    &[],
                    Tolerance::absolute(1e-33),
                )
                .map(|r| r.value)
                .unwrap_or_else(|e| panic!("bump square quadrature failed: {e}"))
            })
            .sum()
    })
}

/// `∫_{-1}^{τ} t^j b(t) dt`.
pub fn bump_partial_moment<T: Real>(j: usize, tau: T) -> T {
    assert!(j <= MAX_MOMENT, "moment order {j} not tabulated");
    let table = &canonical_table()[j];
    let one = T::one();
    if !(tau > -one) {
        return T::zero();
    }
    if !(tau < one) {
        return T::from_dd(table[TABLE_NODES]);
    }
    let pos = ((tau.to_f64() + 1.0) * 0.5 * TABLE_NODES as f64).floor();
    let i = (pos.max(0.0) as usize).min(TABLE_NODES - 1);
    let node = T::from_f64(-1.0 + 2.0 * i as f64 / TABLE_NODES as f64);
    let base = T::from_dd(table[i]);
    if tau == node {
        return base;
    }
    let tail = integrate_real(
        |t: T| t.powi(j as i32) * bump_derivative(t, 0),
        node,
        tau,
        &[],
        Tolerance::absolute(T::EPSILON * 0.01),
    );
    base + match tail {
        Ok(r) => r.value,
        Err(_) => gauss_tail(j, node, tau),
    }
}

fn gauss_tail<T: Real>(j: usize, a: T, b: T) -> T {
    crate::quadrature::gauss_panel(|t: T| t.powi(j as i32) * bump_derivative(t, 0), a, b)
}

/// `∫ t^j b(t) dt` over the whole support.
pub fn bump_moment(j: usize) -> Dd {
    canonical_table()[j][TABLE_NODES]
}

/// `x ↦ A · b((x - c)/a)` with closed-form derivatives up to [`MAX_ORDER`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpKernel {
    center: f64,
    halfwidth: f64,
    amplitude: Dd,
}

/// Unit-amplitude bump centred at `center`.
pub fn make_bump(center: f64, halfwidth: f64) -> Result<BumpKernel> {
    if !(halfwidth > 0.0) || !halfwidth.is_finite() {
        return Err(Error::NonPositiveHalfwidth(halfwidth));
    }
    Ok(BumpKernel {
        center,
        halfwidth,
        amplitude: Dd::one(),
    })
}

impl BumpKernel {
    pub fn new(center: f64, halfwidth: f64, amplitude: f64) -> Result<Self> {
        Ok(make_bump(center, halfwidth)?.scaled(Dd::from(amplitude)))
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn amplitude(&self) -> Dd {
        self.amplitude
    }

    pub fn max_order(&self) -> usize {
        MAX_ORDER
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    pub fn scaled(self, factor: Dd) -> Self {
        BumpKernel {
            amplitude: self.amplitude * factor,
            ..self
        }
    }

    pub fn mirrored(self) -> Self {
        BumpKernel {
            center: -self.center,
            ..self
        }
    }

    /// Derivative of order `n` at `x`. Panics if `n > MAX_ORDER`.
    #[inline]
    pub fn eval<T: Real>(&self, x: T, n: usize) -> T {
        let a = T::from_f64(self.halfwidth);
        let t = (x - T::from_f64(self.center)) / a;
        let b = bump_derivative(t, n);
        if b.is_zero() {
            return b;
        }
        let scale = if n == 0 {
            T::one()
        } else {
            a.powi(-(n as i32))
        };
        T::from_dd(self.amplitude) * scale * b
    }

    /// `∫ x^k K(x) dx` over the whole support.
    pub fn moment(&self, k: usize) -> Dd {
        self.partial_moment_dd(k, None)
    }

    fn partial_moment_dd(&self, k: usize, tau: Option<Dd>) -> Dd {
        let c = Dd::from(self.center);
        let a = Dd::from(self.halfwidth);
        let mut acc = Dd::zero();
        for j in 0..=k {
            let m = match tau {
                None => bump_moment(j),
                Some(t) => bump_partial_moment(j, t),
            };
            acc += Dd::from(binomial(k, j)) * c.powi((k - j) as i32) * a.powi(j as i32) * m;
        }
        acc * self.amplitude * a
    }

    /// `∫_{-∞}^{x} u^k K(u) du`.
    pub fn partial_moment<T: Real>(&self, k: usize, x: T) -> T {
        let (lo, hi) = self.support();
        if !(x > T::from_f64(lo)) {
            return T::zero();
        }
        let a = T::from_f64(self.halfwidth);
        let c = T::from_f64(self.center);
        if !(x < T::from_f64(hi)) {
            return T::from_dd(self.moment(k));
        }
        let tau = (x - c) / a;
        let mut acc = T::zero();
        for j in 0..=k {
            let m = bump_partial_moment(j, tau);
            acc += T::from_f64(binomial(k, j)) * c.powi((k - j) as i32) * a.powi(j as i32) * m;
        }
        acc * T::from_dd(self.amplitude) * a
    }

    /// `∫_{x}^{∞} u^k K(u) du`, accurate when the tail is small.
    pub fn upper_moment<T: Real>(&self, k: usize, x: T) -> T {
        let v = self.mirrored().partial_moment(k, -x);
        if k % 2 == 1 {
            -v
        } else {
            v
        }
    }

    /// `∫ K(x)² dx`.
    pub fn square_integral(&self) -> Dd {
        self.amplitude * self.amplitude * Dd::from(self.halfwidth) * canonical_square()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A real kernel given as a sum of bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpSum {
    bumps: Vec<BumpKernel>,
}

impl BumpSum {
    pub fn new(bumps: Vec<BumpKernel>) -> Self {
        BumpSum { bumps }
    }

    pub fn bumps(&self) -> &[BumpKernel] {
        &self.bumps
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    #[inline]
    pub fn eval<T: Real>(&self, x: T, n: usize) -> T {
        let mut acc = T::zero();
        for b in &self.bumps {
            acc += b.eval(x, n);
        }
        acc
    }

    pub fn moment(&self, k: usize) -> Dd {
        self.bumps.iter().map(|b| b.moment(k)).sum()
    }

    pub fn partial_moment<T: Real>(&self, k: usize, x: T) -> T {
        let mut acc = T::zero();
        for b in &self.bumps {
            acc += b.partial_moment(k, x);
        }
        acc
    }

    pub fn upper_moment<T: Real>(&self, k: usize, x: T) -> T {
        let mut acc = T::zero();
        for b in &self.bumps {
            acc += b.upper_moment(k, x);
        }
        acc
    }

    /// `∫|K|` bound from the bump amplitudes (exact for non-overlapping bumps).
    pub fn abs_mass(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| (b.amplitude.to_f64() * b.halfwidth).abs() * bump_moment(0).to_f64())
            .sum()
    }

    pub fn radius(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center.abs() + b.halfwidth)
            .fold(0.0, f64::max)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .bumps
            .iter()
            .flat_map(|b| [b.center - b.halfwidth, b.center + b.halfwidth])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn mirrored(&self) -> Self {
        BumpSum {
            bumps: self.bumps.iter().map(|b| b.mirrored()).collect(),
        }
    }

    pub fn scaled(&self, factor: Dd) -> Self {
        BumpSum {
            bumps: self.bumps.iter().map(|b| b.scaled(factor)).collect(),
        }
    }

    /// Every bump has a partner at the mirrored centre with equal shape.
    pub fn is_even(&self) -> bool {
        self.bumps.iter().all(|b| {
            if b.center == 0.0 {
                return true;
            }
            self.bumps.iter().any(|o| {
                o.center == -b.center
                    && o.halfwidth == b.halfwidth
                    && ((o.amplitude - b.amplitude).abs().to_f64()
                        <= 1e-14 * b.amplitude.abs().to_f64())
            })
        })
    }
}

fn check_disjoint(bumps: &[BumpKernel]) -> Result<()> {
    for (i, a) in bumps.iter().enumerate() {
        for b in &bumps[i + 1..] {
            let (a0, a1) = a.support();
            let (b0, b1) = b.support();
            if a0.max(b0) < a1.min(b1) {
                return Err(Error::OverlappingSupports(a0, a1, b0, b1));
            }
        }
    }
    Ok(())
}

/// `D(σ,u) = f(u) + λ(σ) g(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMollifier {
    f: BumpSum,
    g: BumpSum,
    l: f64,
    i_f: Dd,
    i_g: Dd,
    i_f2: Dd,
    i_g2: Dd,
    breakpoints: Vec<f64>,
}

/// Placement of the default construction: `f` on `[-f_halfwidth, f_halfwidth]`,
/// `g` a pair at `±inner.0` minus a pair at `±outer.0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelLayout {
    pub f_halfwidth: f64,
    pub inner: (f64, f64),
    pub outer: (f64, f64),
}

impl Default for ModelLayout {
    fn default() -> Self {
        ModelLayout {
            f_halfwidth: 1.0,
            inner: (3.0, 1.0),
            outer: (6.0, 1.0),
        }
    }
}

impl ModelMollifier {
    /// Validates and normalises `f` to unit mass. `g` must already have
    /// (numerically) zero mass.
    pub fn build(f: Vec<BumpKernel>, g: Vec<BumpKernel>) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::EmptyKernel("f"));
        }
        if g.is_empty() {
            return Err(Error::EmptyKernel("g"));
        }
        let all: Vec<BumpKernel> = f.iter().chain(&g).copied().collect();
        check_disjoint(&all)?;
        let f = BumpSum::new(f);
        let g = BumpSum::new(g);
        if !f.is_even() {
            return Err(Error::NotEven("f"));
        }
        if !g.is_even() {
            return Err(Error::NotEven("g"));
        }
        let mass = f.moment(0);
        if mass.abs().to_f64() < 1e-300 {
            return Err(Error::Degenerate("f"));
        }
        let f = f.scaled(Dd::one() / mass);
        let i_g = g.moment(0);
        if i_g.abs().to_f64() > 1e-12 * g.abs_mass() {
            return Err(Error::NonZeroMass(i_g.to_f64()));
        }
        let i_f2: Dd = f.bumps.iter().map(|b| b.square_integral()).sum();
        let i_g2: Dd = g.bumps.iter().map(|b| b.square_integral()).sum();
        if !(i_g2.to_f64() > 0.0) {
            return Err(Error::Degenerate("g"));
        }
        let l = f.radius().max(g.radius());
        let mut breakpoints = f.breakpoints();
        breakpoints.extend(g.breakpoints());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(ModelMollifier {
            i_f: f.moment(0),
            f,
            g,
            l,
            i_g,
            i_f2,
            i_g2,
            breakpoints,
        })
    }

    /// `g = α (b(·-c) + b(·+c)) - β (b(·-c') + b(·+c'))` with `β = α a/a'`,
    /// so `∫g = 0` in exact arithmetic; `α = 1`.
    pub fn with_layout(layout: ModelLayout) -> Result<Self> {
        let ModelLayout {
            f_halfwidth,
            inner,
            outer,
        } = layout;
        let f = vec![make_bump(0.0, f_halfwidth)?];
        let beta = Dd::from(inner.1) / Dd::from(outer.1);
        let g = vec![
            make_bump(-outer.0, outer.1)?.scaled(-beta),
            make_bump(-inner.0, inner.1)?,
            make_bump(inner.0, inner.1)?,
            make_bump(outer.0, outer.1)?.scaled(-beta),
        ];
        Self::build(f, g)
    }

    pub fn f(&self) -> &BumpSum {
        &self.f
    }

    pub fn g(&self) -> &BumpSum {
        &self.g
    }

    /// Support radius: `supp D ⊆ [-l, l]`.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn i_f(&self) -> Dd {
        self.i_f
    }

    pub fn i_g(&self) -> Dd {
        self.i_g
    }

    pub fn i_f2(&self) -> Dd {
        self.i_f2
    }

    pub fn i_g2(&self) -> Dd {
        self.i_g2
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Principal root of `(σ - ∫f²)/∫g²`.
    pub fn lambda<T: Real>(&self, sigma: T) -> Result<Complex<T>> {
        if !(sigma > T::zero()) {
            return Err(Error::NonPositiveSigma(sigma.to_f64()));
        }
        let r = (sigma - T::from_dd(self.i_f2)) / T::from_dd(self.i_g2);
        Ok(if r < T::zero() {
            Complex::new(T::zero(), (-r).sqrt())
        } else {
            Complex::new(r.sqrt(), T::zero())
        })
    }

    /// `D⁽ᵖ⁾(σ, u) = f⁽ᵖ⁾(u) + λ(σ) g⁽ᵖ⁾(u)`.
    pub fn eval_d<T: Real>(&self, sigma: T, u: T, p: usize) -> Result<Complex<T>> {
        check_order(p)?;
        let lam = self.lambda(sigma)?;
        Ok(Complex::new(self.f.eval(u, p), T::zero()) + lam * self.g.eval(u, p))
    }
}

impl Default for ModelMollifier {
    fn default() -> Self {
        ModelMollifier::with_layout(ModelLayout::default()).expect("default layout is valid")
    }
}

pub(crate) fn check_order(p: usize) -> Result<()> {
    if p > MAX_ORDER {
        Err(Error::OrderTooHigh {
            order: p,
            max: MAX_ORDER,
        })
    } else {
        Ok(())
    }
}

/// `φ = Σ cᵢ βᵢ` with `∫ x^j φ = δ_{0j}` for `j = 0..=q`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMollifier {
    q: usize,
    basis: Vec<BumpSum>,
    coefficients: Vec<f64>,
    kernel: BumpSum,
}

/// Default basis: dilated centred bumps for even moments, antisymmetric
/// bump pairs for odd ones.
pub fn make_moment_mollifier(q: usize) -> Result<MomentMollifier> {
    let basis = (0..=q)
        .map(|k| {
            let half = k / 2;
            if k % 2 == 0 {
                Ok(BumpSum::new(vec![make_bump(0.0, 1.0 / (1 + half) as f64)?]))
            } else {
                let hw = 0.5 / (1 + half) as f64;
                Ok(BumpSum::new(vec![
                    make_bump(0.5, hw)?,
                    make_bump(-0.5, hw)?.scaled(-Dd::one()),
                ]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MomentMollifier::from_basis(q, basis)
}

impl MomentMollifier {
    pub fn from_basis(q: usize, basis: Vec<BumpSum>) -> Result<Self> {
        if basis.len() != q + 1 {
            return Err(Error::Invalid(format!(
                "moment basis needs {} elements, got {}",
                q + 1,
                basis.len()
            )));
        }
        if q > MAX_MOMENT {
            return Err(Error::Invalid(format!("q = {q} exceeds {MAX_MOMENT}")));
        }
        let n = q + 1;
        let a = DMatrix::from_fn(n, n, |j, i| basis[i].moment(j).to_f64());
        let mut rhs = DVector::zeros(n);
        rhs[0] = 1.0;
        let lu = a.clone().lu();
        let Some(c) = lu.solve(&rhs) else {
            return Err(Error::SingularMomentSystem(q));
        };
        let scale = a.abs().max();
        let det = lu.determinant().abs();
        if !(det > 1e-13 * scale.powi(n as i32)) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMomentSystem(q));
        }
        let coefficients: Vec<f64> = c
            .iter()
            .map(|v| if v.abs() < 1e-15 { 0.0 } else { *v })
            .collect();
        let kernel = BumpSum::new(
            basis
                .iter()
                .zip(&coefficients)
                .filter(|(_, &c)| c != 0.0)
                .flat_map(|(b, &c)| b.scaled(Dd::from(c)).bumps)
                .collect(),
        );
        Ok(MomentMollifier {
            q,
            basis,
            coefficients,
            kernel,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn basis(&self) -> &[BumpSum] {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kernel(&self) -> &BumpSum {
        &self.kernel
    }

    pub fn eval<T: Real>(&self, x: T, p: usize) -> Result<T> {
        check_order(p)?;
        Ok(self.kernel.eval(x, p))
    }
}

/// Either mollifier family, as seen by the representatives.
#[derive(Clone, Debug, PartialEq)]
pub enum Mollifier {
    Model(Arc<ModelMollifier>),
    /// Canonical-embedding kernel: `u ∗ φ̌_σ` convolves with `φ(-·)`.
    Moment(Arc<MomentMollifier>),
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier::Model(Arc::new(ModelMollifier::default()))
    }
}

impl From<ModelMollifier> for Mollifier {
    fn from(m: ModelMollifier) -> Self {
        Mollifier::Model(Arc::new(m))
    }
}

impl From<MomentMollifier> for Mollifier {
    fn from(m: MomentMollifier) -> Self {
        Mollifier::Moment(Arc::new(m))
    }
}

impl Mollifier {
    pub fn radius(&self) -> f64 {
        match self {
            Mollifier::Model(m) => m.l(),
            Mollifier::Moment(m) => m.kernel.radius(),
        }
    }

    /// The convolution kernel at `σ`, optionally mirrored (`u ↦ -u`).
    pub fn kernel<T: Real>(&self, sigma: T, mirrored: bool) -> Result<Kernel<T>> {
        let mir = |b: &BumpSum| if mirrored { b.mirrored() } else { b.clone() };
        let parts = match self {
            Mollifier::Model(m) => vec![(mir(&m.f), Complex::one()), (mir(&m.g), m.lambda(sigma)?)],
            Mollifier::Moment(m) => {
                if !(sigma > T::zero()) {
                    return Err(Error::NonPositiveSigma(sigma.to_f64()));
                }
                vec![(mir(&m.kernel.mirrored()), Complex::one())]
            }
        };
        let mut breakpoints: Vec<f64> = parts.iter().flat_map(|(b, _)| b.breakpoints()).collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Kernel {
            radius: self.radius(),
            parts,
            breakpoints,
        })
    }
}

/// `K(u) = Σ wᵢ Kᵢ(u)` with real bump sums `Kᵢ` and complex weights.
#[derive(Clone, Debug)]
pub struct Kernel<T> {
    parts: Vec<(BumpSum, Complex<T>)>,
    radius: f64,
    breakpoints: Vec<f64>,
}

impl<T: Real> Kernel<T> {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn parts(&self) -> &[(BumpSum, Complex<T>)] {
        &self.parts
    }

    #[inline]
    pub fn eval(&self, u: T, n: usize) -> Complex<T> {
        let mut acc = Complex::zero();
        for (b, w) in &self.parts {
            let v = b.eval(u, n);
            if !v.is_zero() {
                acc = acc + *w * v;
            }
        }
        acc
    }

    pub fn moment(&self, k: usize) -> Complex<T> {
        self.parts.iter().fold(Complex::zero(), |acc, (b, w)| {
            acc + *w * T::from_dd(b.moment(k))
        })
    }

    /// `∫_{-∞}^{u} v^k K(v) dv`.
    pub fn partial_moment(&self, k: usize, u: T) -> Complex<T> {
        self.parts.iter().fold(Complex::zero(), |acc, (b, w)| {
            acc + *w * b.partial_moment(k, u)
        })
    }

    /// `∫_{u}^{∞} v^k K(v) dv`.
    pub fn upper_moment(&self, k: usize, u: T) -> Complex<T> {
        self.parts.iter().fold(Complex::zero(), |acc, (b, w)| {
            acc + *w * b.upper_moment(k, u)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        // 8th-order central difference
        let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        c.iter()
            .enumerate()
            .map(|(k, ck)| {
                let s = (k + 1) as f64 * h;
                ck * (f(x + s) - f(x - s))
            })
            .sum::<f64>()
            / h
    }

    #[test]
    fn bump_values() {
        let b = make_bump(0.0, 1.0).unwrap();
        assert!((b.eval(0.0, 0) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(b.eval(1.0, 0), 0.0);
        assert_eq!(b.eval(-1.0, 0), 0.0);
        assert!(make_bump(0.0, 0.0).is_err());
        assert!(make_bump(0.0, -1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = make_bump(0.3, 1.7).unwrap();
        for n in 1..=MAX_ORDER {
            for &x in &[0.1, 0.9, -0.7, 1.5] {
                let exact = b.eval(x, n);
                let fd = fd_derivative(|y| b.eval(y, n - 1), x, 1e-3);
                let scale = exact.abs().max(1e-3);
                assert!(
                    (exact - fd).abs() < 1e-6 * scale,
                    "n={n} x={x} {exact} {fd}"
                );
            }
        }
    }

    #[test]
    fn derivatives_vanish_at_endpoints() {
        let b = make_bump(0.0, 1.0).unwrap();
        for n in 0..=MAX_ORDER {
            for &x in &[1.0 - 1e-3, -1.0 + 1e-3] {
                assert!(b.eval(x, n).abs() < 1e-150, "n={n}");
            }
        }
    }

    #[test]
    fn partial_moments_match_direct_quadrature() {
        let b = BumpKernel::new(2.0, 0.5, 1.5).unwrap();
        for k in 0..=3 {
            for &x in &[1.6, 2.0, 2.37, 2.49] {
                let direct = integrate_real(
                    |u: f64| u.powi(k as i32) * b.eval(u, 0),
                    1.5,
                    x,
                    &[],
                    Tolerance::absolute(1e-15),
                )
                .unwrap()
                .value;
                assert!(
                    (b.partial_moment(k, x) - direct).abs() < 1e-14,
                    "k={k} x={x}"
                );
            }
            let full = b.partial_moment(k, 3.0);
            assert!((full - b.moment(k).to_f64()).abs() < 1e-15);
        }
    }

    #[test]
    fn partial_moment_extended_precision() {
        let v = bump_partial_moment(0, Dd::from(0.3));
        let direct = integrate_real(
            |t: Dd| bump_derivative(t, 0),
            Dd::from(-1.0),
            Dd::from(0.3),
            &[],
            Tolerance::absolute(1e-32),
        )
        .unwrap()
        .value;
        assert!((v - direct).abs().to_f64() < 1e-30);
    }

    #[test]
    fn default_model_invariants() {
        let m = ModelMollifier::default();
        assert!((m.i_f().to_f64() - 1.0).abs() < 1e-15);
        assert!(m.i_g().abs().to_f64() < 1e-30);
        assert_eq!(m.l(), 7.0);
        assert!((m.i_f2().to_f64() - 0.675_116_813_009_698).abs() < 1e-12);
        assert!((m.i_g2().to_f64() - 0.532_344_483_379_977_1).abs() < 1e-12);
    }

    #[test]
    fn lambda_branches() {
        let m = ModelMollifier::default();
        let if2 = m.i_f2().to_f64();
        let ig2 = m.i_g2().to_f64();
        assert!(m.lambda(if2).unwrap().norm() < 1e-8);
        let one = m.lambda(if2 + ig2).unwrap();
        assert!((one.re - 1.0).abs() < 1e-15 && one.im == 0.0);
        let half = m.lambda(if2 / 2.0).unwrap();
        assert_eq!(half.re, 0.0);
        assert!((half.im - (if2 / (2.0 * ig2)).sqrt()).abs() < 1e-15);
        assert!(m.lambda(0.0).is_err());
    }

    #[test]
    fn build_rejects_bad_specs() {
        let f = vec![make_bump(0.0, 1.0).unwrap()];
        let one_sided = vec![make_bump(3.0, 1.0).unwrap()];
        assert_eq!(
            ModelMollifier::build(f.clone(), one_sided),
            Err(Error::NotEven("g"))
        );
        let overlapping = vec![make_bump(-0.5, 1.0).unwrap(), make_bump(0.5, 1.0).unwrap()];
        assert!(matches!(
            ModelMollifier::build(f.clone(), overlapping),
            Err(Error::OverlappingSupports(..))
        ));
        let massive = vec![make_bump(-3.0, 1.0).unwrap(), make_bump(3.0, 1.0).unwrap()];
        assert!(matches!(
            ModelMollifier::build(f.clone(), massive),
            Err(Error::NonZeroMass(_))
        ));
        // touching supports are fine
        let touching = ModelMollifier::with_layout(ModelLayout {
            f_halfwidth: 1.0,
            inner: (2.0, 1.0),
            outer: (5.0, 2.0),
        });
        assert!(touching.is_ok());
    }

    #[test]
    fn order_limit() {
        let m = ModelMollifier::default();
        assert!(m.eval_d(0.1, 0.2, MAX_ORDER).is_ok());
        assert!(matches!(
            m.eval_d(0.1, 0.2, MAX_ORDER + 1),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn moment_mollifiers() {
        let m0 = make_moment_mollifier(0).unwrap();
        assert!((m0.kernel().moment(0).to_f64() - 1.0).abs() < 1e-15);
        let m1 = make_moment_mollifier(1).unwrap();
        assert_eq!(m1.coefficients()[1], 0.0);
        let m2 = make_moment_mollifier(2).unwrap();
        for j in 0..=2 {
            let target = if j == 0 { 1.0 } else { 0.0 };
            // independent check by adaptive quadrature of the assembled kernel
            let v = integrate_real(
                |x: f64| x.powi(j) * m2.kernel().eval(x, 0),
                -1.0,
                1.0,
                &[Breakpoint::regular(0.0)],
                Tolerance::absolute(1e-14),
            )
            .unwrap()
            .value;
            assert!((v - target).abs() < 1e-9, "j={j} {v}");
        }
    }

    #[test]
    fn singular_moment_basis() {
        let b = BumpSum::new(vec![make_bump(0.0, 1.0).unwrap()]);
        assert_eq!(
            MomentMollifier::from_basis(1, vec![b.clone(), b]),
            Err(Error::SingularMomentSystem(1))
        );
    }

    use crate::quadrature::Breakpoint;
}
