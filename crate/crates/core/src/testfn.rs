//! Test functions `ψ(x) = p(x) · b(x/R)` with exact derivatives.

use std::fmt;

use crate::error::{Error, Result};
use crate::mollifier::{binomial, bump_derivative, check_order};
use crate::real::Real;

/// Number of derivatives at the origin reported by [`TestFunction::derivatives_at_zero`].
pub const TAYLOR_ORDERS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    name: String,
    poly: Vec<f64>,
    radius: f64,
}

impl TestFunction {
    /// `ψ(x) = (Σ cₖ xᵏ) · b(x/radius)`; the radius must be at least 1.
    pub fn new(name: impl Into<String>, poly: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!(
                "test function radius must be >= 1, got {radius}"
            )));
        }
        if poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite polynomial coefficient".into()));
        }
        let mut poly = poly;
        if poly.is_empty() {
            poly.push(0.0);
        }
        Ok(TestFunction {
            name: name.into(),
            poly,
            radius,
        })
    }

    pub fn bump(radius: f64) -> Result<Self> {
        TestFunction::new("bump", vec![1.0], radius)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn poly(&self) -> &[f64] {
        &self.poly
    }

    pub fn is_pure_bump(&self) -> bool {
        self.poly.iter().skip(1).all(|&c| c == 0.0)
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn eval<T: Real>(&self, x: T) -> T {
        self.derivative_unchecked(x, 0)
    }

    /// `ψ⁽ⁿ⁾(x)` by the Leibniz rule on polynomial and bump factors.
    pub fn derivative<T: Real>(&self, x: T, n: usize) -> Result<T> {
        check_order(n)?;
        Ok(self.derivative_unchecked(x, n))
    }

    pub(crate) fn derivative_unchecked<T: Real>(&self, x: T, n: usize) -> T {
        let r = T::from_f64(self.radius);
        let t = x / r;
        let mut acc = T::zero();
        for k in 0..=n.min(self.poly.len() - 1) {
            let pk = poly_derivative(&self.poly, x, k);
            if pk.is_zero() {
                continue;
            }
            let m = n - k;
            let b = bump_derivative(t, m);
            if b.is_zero() {
                continue;
            }
            acc += T::from_f64(binomial(n, k)) * pk * b * r.powi(-(m as i32));
        }
        acc
    }

    /// `(ψ(0), ψ'(0), …, ψ⁗(0))`.
    pub fn derivatives_at_zero(&self) -> [f64; TAYLOR_ORDERS] {
        let mut out = [0.0; TAYLOR_ORDERS];
        for (n, v) in out.iter_mut().enumerate() {
            *v = self.derivative_unchecked(0.0, n);
        }
        out
    }

    /// `x ↦ ψ(-x)`.
    pub fn mirrored(&self) -> Self {
        TestFunction {
            name: format!("{}~", self.name),
            poly: self
                .poly
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
            radius: self.radius,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn poly_derivative<T: Real>(poly: &[f64], x: T, k: usize) -> T {
    let mut acc = T::zero();
    for j in (k..poly.len()).rev() {
        let falling = (0..k).fold(1.0, |a, i| a * (j - i) as f64);
        acc = acc * x + T::from_f64(poly[j] * falling);
    }
    acc
}

pub fn psi_a() -> TestFunction {
    TestFunction::new("psiA", vec![1.0], 4.0).expect("valid")
}

pub fn psi_b() -> TestFunction {
    TestFunction::new("psiB", vec![1.0, 1.0, 1.0, 1.0], 4.0).expect("valid")
}

pub fn psi_c() -> TestFunction {
    TestFunction::new("psiC", vec![2.0, -1.0, 0.5, 1.0, 0.0], 4.0).expect("valid")
}

pub fn catalog() -> Vec<TestFunction> {
    vec![psi_a(), psi_b(), psi_c()]
}

/// Catalog lookup (`A`, `psiA`, …) or an inline coefficient list such as
/// `1,0,-2` (bump radius 4) or `1,0,-2@5` (radius 5).
pub fn by_name(spec: &str) -> Result<TestFunction> {
    let s = spec.trim();
    match s.to_ascii_lowercase().as_str() {
        "a" | "psia" => return Ok(psi_a()),
        "b" | "psib" => return Ok(psi_b()),
        "c" | "psic" => return Ok(psi_c()),
        _ => {}
    }
    let (coeffs, radius) = match s.split_once('@') {
        Some((c, r)) => (
            c,
            r.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad radius in test function `{spec}`")))?,
        ),
        None => (s, 4.0),
    };
    let poly = coeffs
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Invalid(format!("unknown test function `{spec}`")))?;
    TestFunction::new(s, poly, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, n: usize, h: f64) -> f64 {
        // central differences built from the 9-point stencil
        let s = |k: i32| f(k as f64 * h);
        match n {
            0 => s(0),
            1 => (-s(2) + 8.0 * s(1) - 8.0 * s(-1) + s(-2)) / (12.0 * h),
            2 => (-s(2) + 16.0 * s(1) - 30.0 * s(0) + 16.0 * s(-1) - s(-2)) / (12.0 * h * h),
            3 => {
                (-s(3) + 8.0 * s(2) - 13.0 * s(1) + 13.0 * s(-1) - 8.0 * s(-2) + s(-3))
                    / (8.0 * h.powi(3))
            }
            4 => {
                (-s(3) + 12.0 * s(2) - 39.0 * s(1) + 56.0 * s(0) - 39.0 * s(-1) + 12.0 * s(-2)
                    - s(-3))
                    / (6.0 * h.powi(4))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn values() {
        let a = psi_a();
        assert!((a.eval(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((a.eval(2.0) - (-4.0f64 / 3.0).exp()).abs() < 1e-16);
        assert_eq!(a.eval(4.0), 0.0);
        let odd = TestFunction::new("x", vec![0.0, 1.0], 4.0).unwrap();
        assert_eq!(odd.eval(0.0), 0.0);
        let d = odd.derivatives_at_zero();
        assert!((d[1] - (-1.0f64).exp()).abs() < 1e-16);
        let da = a.derivatives_at_zero();
        assert_eq!(da[1], 0.0);
        assert_eq!(da[3], 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let extra = TestFunction::new("q", vec![1.0, 1.0, 1.0], 4.0).unwrap();
        for psi in catalog().into_iter().chain([extra]) {
            let d = psi.derivatives_at_zero();
            for (n, &dn) in d.iter().enumerate() {
                // one Richardson step removes the h² term of the stencils
                let h = if n >= 3 { 2e-2 } else { 1e-2 };
                let f = |x| psi.eval(x);
                let approx = (4.0 * fd(f, n, h / 2.0) - fd(f, n, h)) / 3.0;
                let scale = dn.abs().max(1.0);
                assert!(
                    (approx - dn).abs() < 1e-6 * scale,
                    "{} n={n}: {approx} vs {dn}",
                    psi.name()
                );
            }
        }
    }

    #[test]
    fn derivative_consistency_away_from_zero() {
        let psi = psi_c();
        for n in 1..=5 {
            for &x in &[-3.1, -0.4, 1.3, 3.7] {
                let exact = psi.derivative(x, n).unwrap();
                let h = 1e-4;
                let approx = (psi.derivative(x + h, n - 1).unwrap()
                    - psi.derivative(x - h, n - 1).unwrap())
                    / (2.0 * h);
                assert!(
                    (exact - approx).abs() < 1e-5 * exact.abs().max(1.0),
                    "n={n} x={x}"
                );
            }
        }
    }

    #[test]
    fn mirror_and_lookup() {
        let b = psi_b();
        let m = b.mirrored();
        for &x in &[-2.0, 0.3, 1.1] {
            assert!((m.eval(x) - b.eval(-x)).abs() < 1e-15);
        }
        assert_eq!(by_name("A").unwrap(), psi_a());
        assert_eq!(by_name("psiC").unwrap(), psi_c());
        let inline = by_name("1, 0, 2@5").unwrap();
        assert_eq!(inline.poly(), &[1.0, 0.0, 2.0]);
        assert_eq!(inline.support_radius(), 5.0);
        assert!(by_name("nope").is_err());
        assert!(TestFunction::new("r", vec![1.0], 0.5).is_err());
    }
}
