//! Adaptive Gauss–Legendre quadrature with forced breakpoints and
//! logarithmic / algebraic endpoint singularities.
//!
//! Panels use the 8-point Gauss–Legendre rule. A panel's error is estimated
//! by comparing its single-panel value with the sum over its two halves; the
//! refined sum is what gets accumulated. Refinement is global: the panel with
//! the largest estimate is bisected until the total estimate meets the
//! tolerance or only roundoff-limited panels remain.
//!
//! Endpoint singularities are removed by a change of variables before the
//! panel rule ever sees them:
//!
//! * `Log` at `a`: `t = a + (b - a) e^{-s}`, `s ∈ [0, S]` with `S` chosen so
//!   the truncated tail is below the unit roundoff.
//! * `Algebraic(α)` at `a` (integrand `~ (t-a)^α`): `t = a + (b - a) v^{1/(1+α)}`.
//!
//! The mapped abscissae are only exact when the singular point is `0`, so
//! callers arrange integrals with the singularity at the origin.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::{Complex, Complex64};
use num_traits::Zero;
use thiserror::Error;

use crate::real::Real;

pub const DEFAULT_MAX_PANELS: usize = 4000;

/// Acceptance rule: the summed error estimate must not exceed
/// `max(abs, rel * ∫|f|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    /// Relative to the L1 norm of the integrand, so it is insensitive to
    /// cancellation inside the integral.
    pub fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Tolerance {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Singularity {
    None,
    Log,
    /// Integrand behaves like `|t - t0|^α` with `α > -1`.
    Algebraic(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct Breakpoint<T> {
    pub at: T,
    pub singularity: Singularity,
}

impl<T: Real> Breakpoint<T> {
    pub fn regular(at: T) -> Self {
        Breakpoint {
            at,
            singularity: Singularity::None,
        }
    }

    pub fn log(at: T) -> Self {
        Breakpoint {
            at,
            singularity: Singularity::Log,
        }
    }

    pub fn algebraic(at: T, exponent: f64) -> Self {
        Breakpoint {
            at,
            singularity: Singularity::Algebraic(exponent),
        }
    }
}

/// A complex-valued integrand together with the points where panels must
/// start and the singular behaviour there.
pub struct Integrand<T, F> {
    f: F,
    breakpoints: Vec<Breakpoint<T>>,
}

impl<T: Real, F: FnMut(T) -> Complex<T>> Integrand<T, F> {
    pub fn new(f: F) -> Self {
        Integrand {
            f,
            breakpoints: Vec::new(),
        }
    }

    pub fn breakpoint(mut self, b: Breakpoint<T>) -> Self {
        self.breakpoints.push(b);
        self
    }

    pub fn breakpoints(mut self, bs: impl IntoIterator<Item = Breakpoint<T>>) -> Self {
        self.breakpoints.extend(bs);
        self
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult<V> {
    pub value: V,
    pub error_estimate: f64,
    pub panels_used: usize,
    pub evaluations: usize,
    /// Estimate of `∫|f|` (largest component).
    pub l1: f64,
    /// Set when refinement stopped because every remaining panel was at the
    /// roundoff floor before the tolerance was met.
    pub roundoff_limited: bool,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("integrand is not finite at t = {at}")]
    NonFinite { at: f64 },
    #[error("panel limit {panels} reached; best estimate {best:?} ± {error_estimate:e}")]
    MaxPanels {
        panels: usize,
        best: Vec<Complex64>,
        error_estimate: f64,
    },
}

#[derive(Clone, Copy, Debug)]
enum Map<T> {
    Affine,
    LogLeft { a: T, len: T },
    LogRight { b: T, len: T },
    AlgLeft { a: T, len: T, gamma: f64 },
    AlgRight { b: T, len: T, gamma: f64 },
}

impl<T: Real> Map<T> {
    #[inline]
    fn apply(&self, p: T) -> (T, T) {
        match *self {
            Map::Affine => (p, T::one()),
            Map::LogLeft { a, len } => {
                let e = (-p).exp() * len;
                (a + e, e)
            }
            Map::LogRight { b, len } => {
                let e = (-p).exp() * len;
                (b - e, e)
            }
            Map::AlgLeft { a, len, gamma } => {
                let (vg, jac) = power_map(p, gamma, len);
                (a + vg, jac)
            }
            Map::AlgRight { b, len, gamma } => {
                let (vg, jac) = power_map(p, gamma, len);
                (b - vg, jac)
            }
        }
    }
}

/// `(len v^γ, len γ v^{γ-1})` for `v > 0`.
#[inline]
fn power_map<T: Real>(v: T, gamma: f64, len: T) -> (T, T) {
    let lv = v.ln();
    let vg = (lv * T::from_f64(gamma)).exp();
    let d = (lv * T::from_f64(gamma - 1.0)).exp();
    (len * vg, len * T::from_f64(gamma) * d)
}

struct Piece<T> {
    map: Map<T>,
    p0: T,
    p1: T,
}

fn log_cutoff<T: Real>() -> f64 {
    -(T::EPSILON.ln()) + 6.0
}

fn singular_map<T: Real>(sing: Singularity, left: bool, a: T, b: T) -> Option<(Map<T>, T, T)> {
    let len = b - a;
    match sing {
        Singularity::None => None,
        Singularity::Log => {
            // nodes nearer than a few ulps to a nonzero endpoint would round onto it
            let end = if left { a } else { b }.abs().to_f64();
            let mut cut = log_cutoff::<T>();
            if end > 0.0 {
                cut = cut.min((len.to_f64() / (4.0 * T::EPSILON * end)).ln());
            }
            let s = T::from_f64(cut.max(1.0));
            let map = if left {
                Map::LogLeft { a, len }
            } else {
                Map::LogRight { b, len }
            };
            Some((map, T::zero(), s))
        }
        Singularity::Algebraic(alpha) => {
            let gamma = 1.0 / (1.0 + alpha);
            let map = if left {
                Map::AlgLeft { a, len, gamma }
            } else {
                Map::AlgRight { b, len, gamma }
            };
            Some((map, T::zero(), T::one()))
        }
    }
}

fn build_pieces<T: Real>(a: T, b: T, breakpoints: &[Breakpoint<T>]) -> Vec<Piece<T>> {
    // Collect interior cut points plus singular flags at the ends.
    let mut cuts: Vec<(T, Singularity)> = vec![(a, Singularity::None), (b, Singularity::None)];
    for bp in breakpoints {
        if bp.at > a && bp.at < b {
            cuts.push((bp.at, bp.singularity));
        } else if bp.at == a {
            cuts[0].1 = bp.singularity;
        } else if bp.at == b {
            cuts[1].1 = bp.singularity;
        }
    }
    cuts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    cuts.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            if earlier.1 == Singularity::None {
                earlier.1 = later.1;
            }
            true
        } else {
            false
        }
    });

    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (lo, sl) = w[0];
        let (hi, sr) = w[1];
        if !(hi > lo) {
            continue;
        }
        let (left_sing, right_sing) = (sl != Singularity::None, sr != Singularity::None);
        if left_sing && right_sing {
            let mid = (lo + hi) / T::from_f64(2.0);
            push_piece(&mut pieces, lo, mid, sl, true);
            push_piece(&mut pieces, mid, hi, sr, false);
        } else if left_sing {
            push_piece(&mut pieces, lo, hi, sl, true);
        } else if right_sing {
            push_piece(&mut pieces, lo, hi, sr, false);
        } else {
            pieces.push(Piece {
                map: Map::Affine,
                p0: lo,
                p1: hi,
            });
        }
    }
    pieces
}

fn push_piece<T: Real>(pieces: &mut Vec<Piece<T>>, lo: T, hi: T, sing: Singularity, left: bool) {
    match singular_map(sing, left, lo, hi) {
        Some((map, p0, p1)) => pieces.push(Piece { map, p0, p1 }),
        None => pieces.push(Piece {
            map: Map::Affine,
            p0: lo,
            p1: hi,
        }),
    }
}

struct Panel<T> {
    piece: usize,
    p0: T,
    p1: T,
    left: Vec<Complex<T>>,
    right: Vec<Complex<T>>,
    l1_left: f64,
    l1_right: f64,
    err: f64,
    floor: f64,
}

struct Rule<'a, T, F> {
    f: F,
    n: usize,
    pieces: &'a [Piece<T>],
    buf: Vec<Complex<T>>,
    evaluations: usize,
    non_finite: Option<f64>,
}

impl<T: Real, F: FnMut(T, &mut [Complex<T>])> Rule<'_, T, F> {
    /// Single 8-point panel on `[p0, p1]` of the given piece: value and L1.
    fn panel(&mut self, piece: usize, p0: T, p1: T) -> (Vec<Complex<T>>, f64) {
        let map = self.pieces[piece].map;
        let two = T::from_f64(2.0);
        let mid = (p0 + p1) / two;
        let half = (p1 - p0) / two;
        let mut acc = vec![Complex::<T>::zero(); self.n];
        let mut l1 = 0.0;
        for &(x, w) in T::gauss_legendre() {
            let p = mid + half * x;
            let (t, jac) = map.apply(p);
            for v in self.buf.iter_mut() {
                *v = Complex::zero();
            }
            (self.f)(t, &mut self.buf);
            self.evaluations += 1;
            let scale = w * half * jac;
            let mut mag = 0.0f64;
            for (a, v) in acc.iter_mut().zip(self.buf.iter()) {
                let m = v.re.to_f64().abs() + v.im.to_f64().abs();
                if !m.is_finite() && self.non_finite.is_none() {
                    self.non_finite = Some(t.to_f64());
                }
                mag = mag.max(m);
                *a = *a + *v * scale;
            }
            l1 += scale.to_f64().abs() * mag;
        }
        (acc, l1)
    }

    fn make_panel(&mut self, piece: usize, p0: T, p1: T, coarse: &[Complex<T>]) -> Panel<T> {
        let mid = (p0 + p1) / T::from_f64(2.0);
        let (left, l1_left) = self.panel(piece, p0, mid);
        let (right, l1_right) = self.panel(piece, mid, p1);
        let err = left
            .iter()
            .zip(&right)
            .zip(coarse)
            .map(|((l, r), c)| {
                let d = *l + *r - *c;
                d.re.to_f64().abs().max(d.im.to_f64().abs())
            })
            .fold(0.0, f64::max);
        let floor = 50.0 * T::EPSILON * (l1_left + l1_right);
        Panel {
            piece,
            p0,
            p1,
            left,
            right,
            l1_left,
            l1_right,
            err,
            floor,
        }
    }
}

struct HeapEntry {
    err: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err
            .total_cmp(&o.err)
            .then_with(|| o.index.cmp(&self.index))
    }
}

/// Vector-valued adaptive integration over `[a, b]`.
///
/// `f(t, out)` writes `n` components into `out`. The error criterion uses
/// the largest component error.
pub fn integrate_vec<T, F>(
    f: F,
    n: usize,
    a: T,
    b: T,
    breakpoints: &[Breakpoint<T>],
    tol: Tolerance,
    max_panels: usize,
) -> Result<QuadResult<Vec<Complex<T>>>, QuadError>
where
    T: Real,
    F: FnMut(T, &mut [Complex<T>]),
{
    if !(a < b) {
        if a == b {
            return Ok(QuadResult {
                value: vec![Complex::zero(); n],
                error_estimate: 0.0,
                panels_used: 0,
                evaluations: 0,
                l1: 0.0,
                roundoff_limited: false,
            });
        }
        return Err(QuadError::InvalidInterval {
            a: a.to_f64(),
            b: b.to_f64(),
        });
    }
    let pieces = build_pieces(a, b, breakpoints);
    let mut rule = Rule {
        f,
        n,
        pieces: &pieces,
        buf: vec![Complex::zero(); n],
        evaluations: 0,
        non_finite: None,
    };

    let mut panels: Vec<Option<Panel<T>>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    let mut total_l1 = 0.0;
    for (i, piece) in pieces.iter().enumerate() {
        let (coarse, _) = rule.panel(i, piece.p0, piece.p1);
        let p = rule.make_panel(i, piece.p0, piece.p1, &coarse);
        total_err += p.err.max(p.floor);
        total_l1 += p.l1_left + p.l1_right;
        heap.push(HeapEntry {
            err: p.err,
            index: panels.len(),
        });
        panels.push(Some(p));
    }
    if let Some(at) = rule.non_finite {
        return Err(QuadError::NonFinite { at });
    }

    let mut leaves = panels.len();
    let mut roundoff_limited = false;
    loop {
        let target = tol.abs.max(tol.rel * total_l1);
        if total_err <= target {
            // The running sums lose accuracy after many removals; confirm.
            let (err, l1) = panels.iter().flatten().fold((0.0, 0.0), |(e, l), p| {
                (e + p.err.max(p.floor), l + p.l1_left + p.l1_right)
            });
            total_err = err;
            total_l1 = l1;
            if total_err <= tol.abs.max(tol.rel * total_l1) {
                break;
            }
        }
        let Some(entry) = heap.pop() else {
            roundoff_limited = true;
            break;
        };
        let p = panels[entry.index].take().expect("live panel");
        let width = (p.p1 - p.p0).abs().to_f64();
        let scale = p.p0.abs().to_f64().max(p.p1.abs().to_f64()).max(1e-300);
        let negligible = p.err <= 0.01 * T::EPSILON * total_l1;
        if p.err <= p.floor || negligible || width <= 64.0 * T::EPSILON * scale {
            // Cannot be improved; keep it as a settled leaf.
            panels[entry.index] = Some(p);
            continue;
        }
        if leaves >= max_panels {
            panels[entry.index] = Some(p);
            let (best, err) = summarize(&panels);
            return Err(QuadError::MaxPanels {
                panels: leaves,
                best: best.iter().map(|c| to_c64(*c)).collect(),
                error_estimate: err,
            });
        }
        total_err -= p.err.max(p.floor);
        total_l1 -= p.l1_left + p.l1_right;
        let mid = (p.p0 + p.p1) / T::from_f64(2.0);
        let children = [
            rule.make_panel(p.piece, p.p0, mid, &p.left),
            rule.make_panel(p.piece, mid, p.p1, &p.right),
        ];
        if let Some(at) = rule.non_finite {
            return Err(QuadError::NonFinite { at });
        }
        for c in children {
            total_err += c.err.max(c.floor);
            total_l1 += c.l1_left + c.l1_right;
            heap.push(HeapEntry {
                err: c.err,
                index: panels.len(),
            });
            panels.push(Some(c));
        }
        leaves += 1;
    }

    let (value, err) = summarize(&panels);
    Ok(QuadResult {
        value,
        error_estimate: err,
        panels_used: leaves,
        evaluations: rule.evaluations,
        l1: total_l1,
        roundoff_limited,
    })
}

/// Sum leaves in interval order so results do not depend on refinement order.
fn summarize<T: Real>(panels: &[Option<Panel<T>>]) -> (Vec<Complex<T>>, f64) {
    let mut live: Vec<&Panel<T>> = panels.iter().flatten().collect();
    live.sort_by(|x, y| {
        x.piece
            .cmp(&y.piece)
            .then(x.p0.partial_cmp(&y.p0).unwrap_or(Ordering::Equal))
    });
    let n = live.first().map_or(0, |p| p.left.len());
    let mut value = vec![Complex::<T>::zero(); n];
    let mut err = 0.0;
    for p in live {
        for (v, (l, r)) in value.iter_mut().zip(p.left.iter().zip(&p.right)) {
            *v = *v + *l + *r;
        }
        err += p.err.max(p.floor);
    }
    (value, err)
}

fn to_c64<T: Real>(c: Complex<T>) -> Complex64 {
    Complex64::new(c.re.to_f64(), c.im.to_f64())
}

/// Scalar complex integration of an [`Integrand`] over `[a, b]`.
pub fn integrate<T, F>(
    integrand: Integrand<T, F>,
    a: T,
    b: T,
    tol: Tolerance,
) -> Result<QuadResult<Complex<T>>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Complex<T>,
{
    let Integrand { mut f, breakpoints } = integrand;
    let r = integrate_vec(
        |t, out: &mut [Complex<T>]| out[0] = f(t),
        1,
        a,
        b,
        &breakpoints,
        tol,
        DEFAULT_MAX_PANELS,
    )?;
    Ok(QuadResult {
        value: r.value[0],
        error_estimate: r.error_estimate,
        panels_used: r.panels_used,
        evaluations: r.evaluations,
        l1: r.l1,
        roundoff_limited: r.roundoff_limited,
    })
}

/// Real-valued convenience wrapper.
pub fn integrate_real<T, F>(
    mut f: F,
    a: T,
    b: T,
    breakpoints: &[Breakpoint<T>],
    tol: Tolerance,
) -> Result<QuadResult<T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let r = integrate_vec(
        |t, out: &mut [Complex<T>]| out[0] = Complex::new(f(t), T::zero()),
        1,
        a,
        b,
        breakpoints,
        tol,
        DEFAULT_MAX_PANELS,
    )?;
    Ok(QuadResult {
        value: r.value[0].re,
        error_estimate: r.error_estimate,
        panels_used: r.panels_used,
        evaluations: r.evaluations,
        l1: r.l1,
        roundoff_limited: r.roundoff_limited,
    })
}

/// One 8-point Gauss–Legendre panel on `[a, b]`, no adaptivity.
pub fn gauss_panel<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T) -> T {
    let two = T::from_f64(2.0);
    let mid = (a + b) / two;
    let half = (b - a) / two;
    T::gauss_legendre()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .fold(T::zero(), |acc, v| acc + v)
        * half
}
