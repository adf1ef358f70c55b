//! The `σ → 0` limit: pairing sweeps, asymptotic fits and verdicts.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{compile, parse, to_reference};
use crate::mollifier::{make_bump, make_moment_mollifier, BumpSum, Mollifier, MomentMollifier};
use crate::real::{Dd, Real};
use crate::representatives::{pair_many_cached, CostHint, PairCache, Representative};
use crate::testfn::TestFunction;

/// Asymptotic basis functions of `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BasisFn {
    InvLn,
    Inv,
    Ln2,
    Ln,
    Const,
    SigmaLn,
    Sigma,
    Sigma2,
}

impl BasisFn {
    pub const ALL: [BasisFn; 8] = [
        BasisFn::InvLn,
        BasisFn::Inv,
        BasisFn::Ln2,
        BasisFn::Ln,
        BasisFn::Const,
        BasisFn::SigmaLn,
        BasisFn::Sigma,
        BasisFn::Sigma2,
    ];

    pub fn eval(self, s: f64) -> f64 {
        let l = s.ln();
        match self {
            BasisFn::InvLn => l / s,
            BasisFn::Inv => 1.0 / s,
            BasisFn::Ln2 => l * l,
            BasisFn::Ln => l,
            BasisFn::Const => 1.0,
            BasisFn::SigmaLn => s * l,
            BasisFn::Sigma => s,
            BasisFn::Sigma2 => s * s,
        }
    }

    /// Unbounded as `σ → 0`.
    pub fn is_divergent(self) -> bool {
        self < BasisFn::Const
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFn::InvLn => "s^-1 ln s",
            BasisFn::Inv => "s^-1",
            BasisFn::Ln2 => "ln^2 s",
            BasisFn::Ln => "ln s",
            BasisFn::Const => "1",
            BasisFn::SigmaLn => "s ln s",
            BasisFn::Sigma => "s",
            BasisFn::Sigma2 => "s^2",
        }
    }
}

impl fmt::Display for BasisFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_BASIS: [BasisFn; 6] = [
    BasisFn::InvLn,
    BasisFn::Inv,
    BasisFn::Ln,
    BasisFn::Const,
    BasisFn::SigmaLn,
    BasisFn::Sigma,
];

/// Significance factor on a divergent coefficient's uncertainty.
pub const DEFAULT_SIGNIFICANCE: f64 = 100.0;

/// Divergent terms smaller than this fraction of the constant at the
/// smallest `σ` are ignored.
pub const MIN_DIVERGENT_SHARE: f64 = 1e-3;

/// Largest relative misfit of the convergent refit still called associated.
pub const DEFAULT_FIT_TOL: f64 = 1e-3;

pub const DOUBLE_TOL: f64 = 1e-11;
pub const DOUBLE_CLOSED_FORM_TOL: f64 = 1e-13;
pub const EXTENDED_TOL: f64 = 1e-14;
pub const EXTENDED_CLOSED_FORM_TOL: f64 = 1e-24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPlan {
    pub sigma_grid: Vec<f64>,
    pub pair_tol: f64,
    /// Tolerance for representatives without inner integrals, which are
    /// cheap enough to refine much further.
    pub closed_form_tol: f64,
    pub basis: Vec<BasisFn>,
    pub precision: Precision,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan::geometric(2f64.powi(-4), 2f64.powi(-12), 0.5).expect("valid default grid")
    }
}

impl SweepPlan {
    /// `σ_max, σ_max·r, …` down to `σ_min` (inclusive up to rounding).
    pub fn geometric(sigma_max: f64, sigma_min: f64, ratio: f64) -> Result<Self> {
        if !(sigma_max > 0.0) || !(sigma_min > 0.0) || sigma_min > sigma_max {
            return Err(Error::Invalid(format!(
                "sigma range must satisfy 0 < min <= max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Invalid(format!(
                "grid ratio must lie in (0, 1), got {ratio}"
            )));
        }
        let mut grid = Vec::new();
        let mut s = sigma_max;
        while s >= sigma_min * (1.0 - 1e-12) {
            grid.push(s);
            s *= ratio;
        }
        let plan = SweepPlan {
            sigma_grid: grid,
            pair_tol: DOUBLE_TOL,
            closed_form_tol: DOUBLE_CLOSED_FORM_TOL,
            basis: DEFAULT_BASIS.to_vec(),
            precision: Precision::Double,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Switches precision and resets both tolerances to that precision's defaults.
    pub fn with_precision(mut self, p: Precision) -> Self {
        self.precision = p;
        (self.pair_tol, self.closed_form_tol) = match p {
            Precision::Double => (DOUBLE_TOL, DOUBLE_CLOSED_FORM_TOL),
            Precision::Extended => (EXTENDED_TOL, EXTENDED_CLOSED_FORM_TOL),
        };
        self
    }

    /// Sets the pairing tolerance; the closed-form one never ends up looser.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.pair_tol = tol;
        self.closed_form_tol = self.closed_form_tol.min(tol);
        self
    }

    /// Tolerance actually used for `rep`.
    pub fn tol_for(&self, rep: &Representative) -> f64 {
        if rep.cost_hint() == CostHint::ClosedForm {
            self.closed_form_tol
        } else {
            self.pair_tol
        }
    }

    /// Points the fit needs: two more than the basis size.
    pub fn min_points(&self) -> usize {
        self.basis.len() + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_grid.len() < self.min_points() {
            return Err(Error::Invalid(format!(
                "sigma grid needs at least {} points for the fit, got {}",
                self.min_points(),
                self.sigma_grid.len()
            )));
        }
        if self.sigma_grid.windows(2).any(|w| !(w[1] < w[0])) || !(self.sigma_grid[0] > 0.0) {
            return Err(Error::Invalid(
                "sigma grid must be positive and strictly decreasing".into(),
            ));
        }
        if !self.basis.contains(&BasisFn::Const) {
            return Err(Error::Invalid("fit basis must include the constant".into()));
        }
        for t in [self.pair_tol, self.closed_form_tol] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Invalid(format!(
                    "pair tolerance must lie in (0, 1), got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub value: Complex64,
    pub error: f64,
}

/// Pairings of `rep` with every `ψ` over the plan's grid, one series per `ψ`.
/// Grid points whose quadrature fails are dropped.
pub fn sweep(
    rep: &Representative,
    psis: &[TestFunction],
    plan: &SweepPlan,
) -> Result<Vec<Vec<SweepPoint>>> {
    plan.validate()?;
    let tol = plan.tol_for(rep);
    let mut out = vec![Vec::new(); psis.len()];
    let mut failure = None;
    match plan.precision {
        Precision::Double => {
            let cache = PairCache::new();
            for &s in &plan.sigma_grid {
                match pair_many_cached(rep, psis, s, tol, &cache) {
                    Ok(ps) => {
                        for (o, p) in out.iter_mut().zip(ps) {
                            o.push(SweepPoint {
                                sigma: s,
                                value: p.value,
                                error: p.error_estimate,
                            });
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
        Precision::Extended => {
            let cache = PairCache::new();
            for &s in &plan.sigma_grid {
                match pair_many_cached(rep, psis, Dd::from(s), tol, &cache) {
                    Ok(ps) => {
                        for (o, p) in out.iter_mut().zip(ps) {
                            o.push(SweepPoint {
                                sigma: s,
                                value: Complex64::new(p.value.re.to_f64(), p.value.im.to_f64()),
                                error: p.error_estimate,
                            });
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
    }
    if out.first().map_or(0, Vec::len) < plan.min_points() {
        return Err(
            failure.unwrap_or_else(|| Error::Invalid("too few sigma points survived".into()))
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Associated { limit: Complex64, error: f64 },
    Divergent { leading: BasisFn, coeff: Complex64 },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn limit(&self) -> Option<Complex64> {
        match self {
            Verdict::Associated { limit, .. } => Some(*limit),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Verdict::Divergent { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Associated { limit, error } => {
                write!(
                    f,
                    "associated, limit {:.10} {:+.10}i (+/- {:.1e})",
                    limit.re, limit.im, error
                )
            }
            Verdict::Divergent { leading, coeff } => {
                write!(
                    f,
                    "divergent, leading {leading} with coefficient {:.6e} {:+.6e}i",
                    coeff.re, coeff.im
                )
            }
            Verdict::Inconclusive { reason } => write!(f, "inconclusive ({reason})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub basis: BasisFn,
    pub value: Complex64,
    /// One-standard-deviation uncertainty.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetDeviation {
    pub expression: String,
    pub value: Complex64,
    pub abs: f64,
    pub rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssociationReport {
    pub values: Vec<SweepPoint>,
    pub coefficients: Vec<Coefficient>,
    /// Weighted `χ²` per degree of freedom of the full-basis fit.
    pub chi2_dof: f64,
    pub verdict: Verdict,
    pub target: Option<TargetDeviation>,
}

impl AssociationReport {
    pub fn attach_target(&mut self, expression: String, value: Complex64) {
        let (abs, rel) = match self.verdict.limit() {
            Some(l) => {
                let d = (l - value).norm();
                (d, d / value.norm().max(f64::MIN_POSITIVE))
            }
            None => (f64::INFINITY, f64::INFINITY),
        };
        self.target = Some(TargetDeviation {
            expression,
            value,
            abs,
            rel,
        });
    }
}

struct Fit {
    coeffs: Vec<Complex64>,
    stderr: Vec<f64>,
    /// `χ²` per degree of freedom with the quadrature errors as weights.
    chi2: f64,
}

/// Weighted least squares of `points` against the `m` columns `col(j, σ)`,
/// real and imaginary parts sharing one design. `None` when the design is
/// rank deficient. With `floor` the unit-weight variance is kept at least 1,
/// so the uncertainties never undercut the quadrature errors.
fn lsq(
    points: &[SweepPoint],
    m: usize,
    col: impl Fn(usize, f64) -> f64,
    floor: bool,
) -> Option<Fit> {
    let n = points.len();
    if n < m {
        return None;
    }
    let w: Vec<f64> = points
        .iter()
        .map(|p| {
            let floor = (1e-15 * p.value.norm()).max(f64::MIN_POSITIVE);
            1.0 / p.error.max(floor)
        })
        .collect();
    let mut a = DMatrix::from_fn(n, m, |i, j| w[i] * col(j, points[i].sigma));
    // unit column norms keep the SVD well scaled
    let scale: Vec<f64> = (0..m).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return None;
    }
    let solve = |b: DVector<f64>| svd.solve(&b, 0.0).ok();
    let re = solve(DVector::from_fn(n, |i, _| w[i] * points[i].value.re))?;
    let im = solve(DVector::from_fn(n, |i, _| w[i] * points[i].value.im))?;
    let coeffs: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(re[j], im[j]) / scale[j])
        .collect();

    let chi2: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, wi)| {
            let model: Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * col(j, p.sigma))
                .sum();
            (wi * (p.value - model).norm()).powi(2)
        })
        .sum();
    let chi2 = chi2 / (n - m).max(1) as f64;
    let var = if floor { chi2.max(1.0) } else { chi2 };
    let v = svd.v_t.as_ref().expect("v requested").transpose();
    let stderr = (0..m)
        .map(|j| {
            let c: f64 = (0..m)
                .map(|k| (v[(j, k)] / svd.singular_values[k]).powi(2))
                .sum();
            (c * var).sqrt() / scale[j]
        })
        .collect();
    Some(Fit {
        coeffs,
        stderr,
        chi2,
    })
}

/// Column `σ^k (ln σ)^l` of a convergent model, `(0, 0)` being the constant.
type Term = (i32, i32);

fn term(t: Term, s: f64) -> f64 {
    s.powi(t.0) * s.ln().powi(t.1)
}

/// Convergent models tried for the limit: polynomials in `σ` of degree
/// 1 to 6, and the same with `σ^k ln σ` companions up to degree 3.
fn limit_models() -> Vec<Vec<Term>> {
    let mut out = Vec::new();
    for k in 1..=6 {
        out.push((0..=k).map(|j| (j, 0)).collect());
    }
    for k in 1..=3 {
        let mut b = vec![(0, 0)];
        for j in 1..=k {
            b.push((j, 0));
            b.push((j, 1));
        }
        out.push(b);
    }
    out
}

/// Limit from the convergent model with the smallest uncertainty on its
/// constant, each model keeping at least two degrees of freedom. The
/// uncertainty follows the actual scatter, since quadrature estimates are
/// often far more pessimistic than the true error.
fn extrapolate(values: &[SweepPoint]) -> Option<(Complex64, f64, Fit)> {
    limit_models()
        .into_iter()
        .filter(|b| values.len() >= b.len() + 2)
        .filter_map(|b| lsq(values, b.len(), |j, s| term(b[j], s), false))
        .filter(|f| f.stderr[0].is_finite())
        .min_by(|x, y| x.stderr[0].total_cmp(&y.stderr[0]))
        .map(|f| (f.coeffs[0], f.stderr[0], f))
}

/// Fits `values` and decides between associated, divergent and inconclusive.
///
/// A divergent coefficient counts when it exceeds `significance` times its
/// uncertainty and its term at the smallest `σ` is at least
/// [`MIN_DIVERGENT_SHARE`] of the constant.
pub fn fit_and_judge(
    values: &[SweepPoint],
    basis: &[BasisFn],
    significance: f64,
) -> AssociationReport {
    let mut report = AssociationReport {
        values: values.to_vec(),
        coefficients: Vec::new(),
        chi2_dof: f64::NAN,
        verdict: Verdict::Inconclusive {
            reason: String::new(),
        },
        target: None,
    };
    if values.len() < basis.len() + 2 {
        report.verdict = Verdict::Inconclusive {
            reason: format!(
                "{} points for {} basis functions",
                values.len(),
                basis.len()
            ),
        };
        return report;
    }
    let Some(fit) = lsq(values, basis.len(), |j, s| basis[j].eval(s), true) else {
        report.verdict = Verdict::Inconclusive {
            reason: "rank-deficient design".into(),
        };
        return report;
    };
    report.chi2_dof = fit.chi2;
    report.coefficients = basis
        .iter()
        .zip(fit.coeffs.iter().zip(&fit.stderr))
        .map(|(&b, (&value, &stderr))| Coefficient {
            basis: b,
            value,
            stderr,
        })
        .collect();
    let s_min = values.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min);
    let constant = basis
        .iter()
        .position(|&b| b == BasisFn::Const)
        .map_or(Complex64::new(0.0, 0.0), |i| fit.coeffs[i]);
    let leading = report
        .coefficients
        .iter()
        .filter(|c| c.basis.is_divergent())
        .filter(|c| c.value.norm() > significance * c.stderr)
        .filter(|c| (c.value * c.basis.eval(s_min)).norm() > MIN_DIVERGENT_SHARE * constant.norm())
        .min_by_key(|c| c.basis);
    if let Some(c) = leading {
        report.verdict = Verdict::Divergent {
            leading: c.basis,
            coeff: c.value,
        };
        return report;
    }
    let Some((limit, error, _)) = extrapolate(values) else {
        report.verdict = Verdict::Inconclusive {
            reason: "no convergent model fits".into(),
        };
        return report;
    };
    let scale = values.iter().map(|p| p.value.norm()).fold(0.0, f64::max);
    if !(error <= DEFAULT_FIT_TOL * limit.norm().max(1e-3 * scale)) {
        report.verdict = Verdict::Inconclusive {
            reason: format!("limit uncertainty {error:.1e} too large"),
        };
        return report;
    }
    report.verdict = Verdict::Associated { limit, error };
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Associated,
    Divergent,
}

/// One expression of a catalog case together with its target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variant {
    pub label: &'static str,
    pub expr: &'static str,
    pub target: Option<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Case {
    pub id: &'static str,
    pub description: &'static str,
    pub variants: Vec<Variant>,
    pub expect: Expectation,
    /// Relative tolerance on the limit.
    pub tol: f64,
}

fn v(label: &'static str, expr: &'static str, target: &'static str) -> Variant {
    Variant {
        label,
        expr,
        target: Some(target),
    }
}

pub const EMBED_ID: &str = "REMARK-EMBED";

pub fn catalog() -> Vec<Case> {
    let case = |id, description, variants, tol| Case {
        id,
        description,
        variants,
        expect: Expectation::Associated,
        tol,
    };
    vec![
        case("DD", "D ~ delta", vec![v("D", "D", "D")], 1e-5),
        case("D2D", "D^2 ~ delta", vec![v("D^2", "D * D", "D")], 1e-5),
        case(
            "HD",
            "H.D ~ delta/2",
            vec![v("H.D", "H * D", "1/2 D")],
            1e-5,
        ),
        case(
            "HpH",
            "H^p ~ theta",
            vec![v("H^2", "H * H", "H"), v("H^3", "H * H * H", "H")],
            1e-5,
        ),
        case(
            "HD1",
            "H.D' ~ -delta + delta'/2",
            vec![v("H.D'", "H * D'", "-D + 1/2 D'")],
            1e-5,
        ),
        case(
            "TH1M",
            "X_-^-2.H - Ln x_+.D' ~ -delta",
            vec![v("-", "Xm^-2 * H - LnP * D'", "-D")],
            1e-3,
        ),
        case(
            "TH1P",
            "X_+^-2.H^ + Ln x_-.D' ~ -delta",
            vec![v("+", "Xp^-2 * Hc + LnM * D'", "-D")],
            1e-3,
        ),
        case(
            "COR1P",
            "X_+^-2.H - Ln x_-.D' ~ x_+^-2 + delta",
            vec![v("+", "Xp^-2 * H - LnM * D'", "Xp^-2 + D")],
            1e-3,
        ),
        case(
            "COR1H",
            "X^-2 sgn x.H + Ln|x| sgn x.D' ~ x_+^-2 + 2 delta",
            vec![v("H", "Xsgn^-2 * H + LnSgn * D'", "Xp^-2 + 2 D")],
            1e-3,
        ),
        case(
            "COR2P",
            "X^-2.H - Ln|x|.D' ~ x_+^-2",
            vec![v("+", "X^-2 * H - LnAbs * D'", "Xp^-2")],
            1e-3,
        ),
        case(
            "COR2",
            "(X +- i0)^-2.H - Ln|x|.D' ~ x_+^-2 -+ i pi delta +- i pi/2 delta'",
            vec![
                v(
                    "+i0",
                    "Xi0p^-2 * H - LnAbs * D'",
                    "Xp^-2 - i pi D + i pi/2 D'",
                ),
                v(
                    "-i0",
                    "Xi0m^-2 * H - LnAbs * D'",
                    "Xp^-2 + i pi D - i pi/2 D'",
                ),
            ],
            1e-3,
        ),
        case(
            "TH2P",
            "X_+.D'''' + H.D''' ~ 5/2 delta'' - 3/2 delta'''",
            vec![v("+", "Xp^1 * D'''' + H * D'''", "5/2 D'' - 3/2 D'''")],
            1e-3,
        ),
        case(
            "TH2M",
            "X_-.D'''' - H^.D''' ~ 5/2 delta'' + 3/2 delta'''",
            vec![v("-", "Xm^1 * D'''' - Hc * D'''", "5/2 D'' + 3/2 D'''")],
            1e-3,
        ),
        Case {
            id: EMBED_ID,
            description: "first balanced product under two moment mollifiers",
            variants: vec![Variant {
                label: "embed",
                expr: "Xm^-2 * H - LnP * D'",
                target: None,
            }],
            expect: Expectation::Divergent,
            tol: 1e-3,
        },
    ]
}

pub fn find_case(id: &str) -> Result<Case> {
    catalog()
        .into_iter()
        .find(|c| c.id.eq_ignore_ascii_case(id) || (id == "HD'" && c.id == "HD1"))
        .ok_or_else(|| Error::Invalid(format!("unknown case `{id}`")))
}

/// Sweep, fit and target comparison of one expression for every `ψ`.
pub fn evaluate(
    expr: &str,
    target: Option<&str>,
    m: &Mollifier,
    psis: &[TestFunction],
    plan: &SweepPlan,
) -> Result<Vec<AssociationReport>> {
    let ast = parse(expr).map_err(|e| Error::Invalid(format!("in `{expr}`: {e}")))?;
    let rep = compile(&ast, m)?;
    let target = match target {
        Some(t) => {
            let ast = parse(t).map_err(|e| Error::Invalid(format!("in `{t}`: {e}")))?;
            Some((ast.print(), to_reference(&ast)?))
        }
        None => None,
    };
    let series = sweep(&rep, psis, plan)?;
    let mut out = Vec::with_capacity(psis.len());
    for (values, psi) in series.iter().zip(psis) {
        let mut r = fit_and_judge(values, &plan.basis, DEFAULT_SIGNIFICANCE);
        if let Some((text, u)) = &target {
            r.attach_target(text.clone(), u.eval(psi)?);
        }
        out.push(r);
    }
    Ok(out)
}

/// Reports of one variant of a case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantReport {
    pub case: &'static str,
    pub variant: &'static str,
    pub expr: &'static str,
    /// Per `ψ`, in the order given.
    pub reports: Vec<AssociationReport>,
}

/// Runs every variant of a catalog case. The embedding case ignores `m` and
/// uses [`embedding_mollifiers`].
pub fn verify_case(
    id: &str,
    m: &Mollifier,
    psis: &[TestFunction],
    plan: &SweepPlan,
) -> Result<Vec<VariantReport>> {
    let case = find_case(id)?;
    if case.id == EMBED_ID {
        let (a, b) = embedding_mollifiers(2)?;
        let (ra, rb) = embedding_counterexample_with(&a, &b, psis, plan)?;
        return Ok(vec![
            VariantReport {
                case: case.id,
                variant: "even",
                expr: case.variants[0].expr,
                reports: ra,
            },
            VariantReport {
                case: case.id,
                variant: "skew",
                expr: case.variants[0].expr,
                reports: rb,
            },
        ]);
    }
    case.variants
        .iter()
        .map(|v| {
            Ok(VariantReport {
                case: case.id,
                variant: v.label,
                expr: v.expr,
                reports: evaluate(v.expr, v.target, m, psis, plan)?,
            })
        })
        .collect()
}

/// Two distinct moment mollifiers of order `q`: the default even one and
/// one built on a non-symmetric basis.
pub fn embedding_mollifiers(q: usize) -> Result<(MomentMollifier, MomentMollifier)> {
    let even = make_moment_mollifier(q)?;
    let centers = [
        (0.0, 1.0),
        (0.25, 0.5),
        (-0.5, 0.5),
        (0.5, 0.25),
        (-0.25, 0.25),
        (0.6, 0.2),
        (-0.6, 0.2),
    ];
    let basis = centers[..=q]
        .iter()
        .map(|&(c, h)| Ok(BumpSum::new(vec![make_bump(c, h)?])))
        .collect::<Result<Vec<_>>>()?;
    let skew = MomentMollifier::from_basis(q, basis)?;
    Ok((even, skew))
}

/// The first balanced product evaluated with two moment mollifiers in
/// place of the model `D`.
pub fn embedding_counterexample(
    q: usize,
    psis: &[TestFunction],
    plan: &SweepPlan,
) -> Result<(Vec<AssociationReport>, Vec<AssociationReport>)> {
    if q < 2 {
        return Err(Error::Invalid(format!(
            "embedding counterexample needs q >= 2, got {q}"
        )));
    }
    let (a, b) = embedding_mollifiers(q)?;
    embedding_counterexample_with(&a, &b, psis, plan)
}

pub fn embedding_counterexample_with(
    a: &MomentMollifier,
    b: &MomentMollifier,
    psis: &[TestFunction],
    plan: &SweepPlan,
) -> Result<(Vec<AssociationReport>, Vec<AssociationReport>)> {
    let expr = find_case(EMBED_ID)?.variants[0].expr;
    let ma = Mollifier::from(a.clone());
    let mb = Mollifier::from(b.clone());
    Ok((
        evaluate(expr, None, &ma, psis, plan)?,
        evaluate(expr, None, &mb, psis, plan)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(mut f: impl FnMut(f64) -> Complex64) -> Vec<SweepPoint> {
        SweepPlan::default()
            .sigma_grid
            .iter()
            .map(|&s| SweepPoint {
                sigma: s,
                value: f(s),
                error: 1e-14,
            })
            .collect()
    }

    #[test]
    fn exact_model_is_recovered() {
        let pts = synth(|s| Complex64::new(3.0 + 0.7 * s, -1.0 + s * s.ln()));
        let r = fit_and_judge(&pts, &DEFAULT_BASIS, DEFAULT_SIGNIFICANCE);
        let l = r.verdict.limit().expect("associated");
        assert!((l - Complex64::new(3.0, -1.0)).norm() < 1e-12, "{l}");
    }

    #[test]
    fn small_inverse_term_is_divergent() {
        let pts = synth(|s| Complex64::new(3.0 + 1e-2 / s + s, 0.0));
        let r = fit_and_judge(&pts, &DEFAULT_BASIS, DEFAULT_SIGNIFICANCE);
        match r.verdict {
            Verdict::Divergent { leading, coeff } => {
                assert_eq!(leading, BasisFn::Inv);
                assert!((coeff.re - 1e-2).abs() < 1e-8);
            }
            v => panic!("{v}"),
        }
        let pts = synth(|s| Complex64::new(0.5 * s.ln() / s, 1.0));
        let r = fit_and_judge(&pts, &DEFAULT_BASIS, DEFAULT_SIGNIFICANCE);
        assert!(matches!(
            r.verdict,
            Verdict::Divergent {
                leading: BasisFn::InvLn,
                ..
            }
        ));
    }

    #[test]
    fn noise_does_not_fake_divergence() {
        // deterministic pseudo-noise at the quoted error level
        let mut k = 0u32;
        let pts = synth(|s| {
            k += 1;
            let n = (k.wrapping_mul(2654435761) % 1000) as f64 / 1000.0 - 0.5;
            Complex64::new(-0.3678 + 0.2 * s + 1e-14 * n, 0.0)
        });
        let r = fit_and_judge(&pts, &DEFAULT_BASIS, DEFAULT_SIGNIFICANCE);
        assert!((r.verdict.limit().unwrap().re + 0.3678).abs() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_inconclusive() {
        let pts = synth(|s| Complex64::new(s, 0.0));
        let r = fit_and_judge(
            &pts,
            &[BasisFn::Const, BasisFn::Sigma, BasisFn::Sigma],
            DEFAULT_SIGNIFICANCE,
        );
        assert!(matches!(r.verdict, Verdict::Inconclusive { .. }));
        let r = fit_and_judge(&pts[..4], &DEFAULT_BASIS, DEFAULT_SIGNIFICANCE);
        assert!(matches!(r.verdict, Verdict::Inconclusive { .. }));
    }

    #[test]
    fn plans() {
        let p = SweepPlan::default();
        assert_eq!(p.sigma_grid.len(), 9);
        assert_eq!(p.sigma_grid[8], 2f64.powi(-12));
        assert!(SweepPlan::geometric(0.1, 0.05, 0.5).is_err());
        assert!(SweepPlan::geometric(0.1, 0.2, 0.5).is_err());
        let mut q = p.clone();
        q.basis.retain(|&b| b != BasisFn::Const);
        assert!(q.validate().is_err());
    }

    #[test]
    fn catalog_ids() {
        let ids: Vec<_> = catalog().iter().map(|c| c.id).collect();
        assert_eq!(ids.len(), 14);
        assert!(find_case("hd'").is_ok() || find_case("HD'").is_ok());
        assert!(find_case("BOGUS").is_err());
        for c in catalog() {
            for v in &c.variants {
                parse(v.expr).unwrap();
                if let Some(t) = v.target {
                    to_reference(&parse(t).unwrap()).unwrap();
                }
            }
        }
    }
}
