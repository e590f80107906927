//! Univariate polynomial constructions with audited approximation
//! certificates, coefficient-norm bounds, and the embedding of p(w·x) into
//! the multinomial feature space.
//!
//! Approximants are built as truncated Chebyshev series. The monomial
//! coefficients (what the norm certificates are about) are derived from the
//! series, but at degrees beyond ~30 they grow so large that Horner
//! evaluation in f64 loses all precision, so audits evaluate the Chebyshev
//! form with Clenshaw's recurrence. Both describe the same polynomial.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv};

use crate::error::{input, Error, Result};
use crate::kernels::{explicit_feature_map, feature_dimension, norm, FEATURE_CAPACITY};

/// Degree cap for every constructed approximant.
pub const MAX_DEGREE: usize = 200;

/// Number of equispaced points in the default audit grid.
pub const AUDIT_POINTS: usize = 100_000;

/// Slack added to every audited bound to absorb roundoff.
pub const AUDIT_SLACK: f64 = 1e-9;

const SEARCH_POINTS: usize = 4_001;
const CHEBYSHEV_NODES: usize = 2_048;

/// Dense monomial-basis polynomial Σ β_i t^i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnivariatePolynomial {
    coeffs: Vec<f64>,
}

impl UnivariatePolynomial {
    /// Build from degree-ascending coefficients. Trailing exact zeros are
    /// dropped; the zero polynomial keeps a single `0.0`.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return input("polynomial coefficients must be finite");
        }
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// √Σβ_i².
    pub fn coeff_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// p^r by repeated convolution.
    pub fn pow(&self, r: u32) -> Self {
        let mut acc = Self { coeffs: vec![1.0] };
        for _ in 0..r {
            acc = acc.mul(self);
        }
        acc
    }
}

/// Horner evaluation of Σ β_i t^i.
pub fn eval_poly(p: &UnivariatePolynomial, t: f64) -> f64 {
    p.eval(t)
}

/// Chebyshev polynomial T_r in the monomial basis.
pub fn chebyshev(r: usize) -> Result<UnivariatePolynomial> {
    if r > 64 {
        return Err(Error::Capacity(format!(
            "T_{r} requested; monomial Chebyshev coefficients are capped at r <= 64"
        )));
    }
    Ok(UnivariatePolynomial {
        coeffs: chebyshev_monomials(r).pop().expect("r+1 rows"),
    })
}

/// Monomial coefficients of T_0..=T_r.
fn chebyshev_monomials(r: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(r + 1);
    rows.push(vec![1.0]);
    if r >= 1 {
        rows.push(vec![0.0, 1.0]);
    }
    for k in 2..=r {
        let mut next = vec![0.0; k + 1];
        for (i, c) in rows[k - 1].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in rows[k - 2].iter().enumerate() {
            next[i] -= c;
        }
        rows.push(next);
    }
    rows
}

/// Polynomial Σ c_j T_j(t) held in the Chebyshev basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    /// Interpolation coefficients of `f` on [-1,1] at Chebyshev nodes.
    pub fn interpolate(f: impl Fn(f64) -> f64, max_degree: usize) -> Self {
        let n = CHEBYSHEV_NODES.max(4 * (max_degree + 1));
        let values: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                (theta, f(theta.cos()))
            })
            .collect();
        let coeffs = (0..=max_degree)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .map(|(theta, v)| v * (j as f64 * theta).cos())
                    .sum();
                let c = 2.0 * s / n as f64;
                if j == 0 {
                    c / 2.0
                } else {
                    c
                }
            })
            .collect();
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn truncate(&self, degree: usize) -> Self {
        Self {
            coeffs: self.coeffs[..=degree.min(self.degree())].to_vec(),
        }
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }

    /// (a + b·p) applied coefficientwise.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut coeffs: Vec<f64> = self.coeffs.iter().map(|c| b * c).collect();
        coeffs[0] += a;
        Self { coeffs }
    }

    pub fn to_monomial(&self) -> UnivariatePolynomial {
        let rows = chebyshev_monomials(self.degree());
        let mut out = vec![0.0; self.coeffs.len()];
        for (c, row) in self.coeffs.iter().zip(&rows) {
            if *c == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row) {
                *o += c * r;
            }
        }
        UnivariatePolynomial::new(out).expect("finite coefficients")
    }
}

/// Certified facts about an approximating polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxCertificate {
    /// Audited max |p| on [-1,1].
    pub sup_bound: f64,
    /// √Σβ_i² of the monomial coefficients.
    pub coeff_l2: f64,
    /// Margin outside of which the sign contract holds (sign approximants only).
    pub margin: Option<f64>,
    /// Approximation tolerance.
    pub tol: f64,
    pub degree: usize,
    /// Measured constant C in the degree bound of the construction.
    pub degree_constant: f64,
    pub audit_points: usize,
    /// Largest gap between Horner on the monomial coefficients and the
    /// Chebyshev form on the search grid; large at high degree.
    pub monomial_drift: f64,
}

/// A constructed approximation: the monomial polynomial, its Chebyshev form
/// (used for evaluation), and the audited certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    pub poly: UnivariatePolynomial,
    pub series: ChebyshevSeries,
    pub certificate: ApproxCertificate,
}

impl Approximant {
    pub fn eval(&self, t: f64) -> f64 {
        self.series.eval(t)
    }
}

/// What an audit checks.
#[derive(Clone, Copy)]
pub enum AuditTarget<'a> {
    /// |p| < 1+τ on [-1,1] and |p − sign| < τ off (-ρ, ρ).
    Sign { margin: f64, tol: f64 },
    /// {0,1} version: |p| < 1+τ, |p − 1[t>0]| < τ off (-ρ, ρ).
    ZeroOneSign { margin: f64, tol: f64 },
    /// sup |p − f| ≤ τ on [-1,1].
    Function { f: &'a dyn Fn(f64) -> f64, tol: f64 },
}

/// Measured quantities from an audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditReport {
    pub sup_abs: f64,
    pub max_error: f64,
    pub passed: bool,
}

/// Audit grid: `points` equispaced values on [-1,1] plus the endpoints and
/// ±margin exactly.
pub fn audit_grid(points: usize, margin: Option<f64>) -> Vec<f64> {
    let points = points.max(2);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect();
    grid.push(-1.0);
    grid.push(1.0);
    if let Some(r) = margin {
        grid.push(r);
        grid.push(-r);
    }
    grid
}

pub fn audit(p: impl Fn(f64) -> f64, target: AuditTarget<'_>, points: usize) -> AuditReport {
    let margin = match target {
        AuditTarget::Sign { margin, .. } | AuditTarget::ZeroOneSign { margin, .. } => Some(margin),
        AuditTarget::Function { .. } => None,
    };
    let mut sup_abs: f64 = 0.0;
    let mut max_error: f64 = 0.0;
    for t in audit_grid(points, margin) {
        let v = p(t);
        if !v.is_finite() {
            return AuditReport {
                sup_abs: f64::INFINITY,
                max_error: f64::INFINITY,
                passed: false,
            };
        }
        sup_abs = sup_abs.max(v.abs());
        let err = match target {
            AuditTarget::Sign { margin, .. } if t.abs() >= margin => (v - t.signum()).abs(),
            AuditTarget::ZeroOneSign { margin, .. } if t.abs() >= margin => {
                (v - if t > 0.0 { 1.0 } else { 0.0 }).abs()
            }
            AuditTarget::Function { f, .. } => (v - f(t)).abs(),
            _ => 0.0,
        };
        max_error = max_error.max(err);
    }
    let passed = match target {
        AuditTarget::Sign { tol, .. } | AuditTarget::ZeroOneSign { tol, .. } => {
            sup_abs < 1.0 + tol + AUDIT_SLACK && max_error < tol + AUDIT_SLACK
        }
        AuditTarget::Function { tol, .. } => max_error <= tol + AUDIT_SLACK,
    };
    AuditReport {
        sup_abs,
        max_error,
        passed,
    }
}

fn monomial_drift(poly: &UnivariatePolynomial, series: &ChebyshevSeries) -> f64 {
    audit_grid(SEARCH_POINTS, None)
        .into_iter()
        .map(|t| (poly.eval(t) - series.eval(t)).abs())
        .fold(0.0, f64::max)
}

fn round_up_odd(d: usize) -> usize {
    if d.is_multiple_of(2) {
        d + 1
    } else {
        d
    }
}

/// Smallest truncation degree (from `degrees`) whose series passes the
/// coarse search audit, then confirmed on the full grid with up to three
/// 25% degree escalations.
fn certify_truncation(
    full: &ChebyshevSeries,
    degrees: impl Iterator<Item = usize>,
    target: AuditTarget<'_>,
    odd: bool,
) -> Result<(ChebyshevSeries, AuditReport)> {
    let first = degrees
        .take_while(|&d| d <= MAX_DEGREE)
        .find(|&d| audit(|t| full.truncate(d).eval(t), target, SEARCH_POINTS).passed)
        .ok_or_else(|| {
            Error::Construction(format!("no truncation up to degree {MAX_DEGREE} passes the audit"))
        })?;
    let mut degree = first;
    for _ in 0..=3 {
        let series = full.truncate(degree);
        let report = audit(|t| series.eval(t), target, AUDIT_POINTS);
        if report.passed {
            return Ok((series, report));
        }
        let bumped = (degree as f64 * 1.25).ceil() as usize;
        degree = if odd { round_up_odd(bumped) } else { bumped };
        if degree > MAX_DEGREE {
            break;
        }
    }
    Err(Error::Construction(format!(
        "audit failed after degree escalation from {first}"
    )))
}

fn check_margin_tol(margin: f64, tol: f64) -> Result<()> {
    if !(margin > 0.0 && margin <= 1.0) {
        return input(format!("margin must lie in (0,1], got {margin}"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return input(format!("tolerance must lie in (0,1), got {tol}"));
    }
    Ok(())
}

/// Odd polynomial p with |p| < 1+τ on [-1,1] and |p(t) − sign(t)| < τ for
/// |t| ≥ ρ, of degree O((1/ρ)·log(1/τ)).
///
/// Construction: truncated Chebyshev series of erf(κt), with κ chosen so
/// that the smoothed step is within a fraction of τ of ±1 at |t| = ρ. Even
/// coefficients are exactly zero. Several splits of τ between smoothing and
/// truncation are tried and the lowest certified degree kept.
pub fn sign_approx(margin: f64, tol: f64) -> Result<Approximant> {
    check_margin_tol(margin, tol)?;
    let target = AuditTarget::Sign { margin, tol };
    let mut best: Option<(ChebyshevSeries, AuditReport)> = None;
    for split in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let kappa = erf_inv(1.0 - split * tol) / margin;
        let full = ChebyshevSeries::interpolate(|t| erf(kappa * t), MAX_DEGREE);
        let mut coeffs = full.coeffs().to_vec();
        for c in coeffs.iter_mut().step_by(2) {
            *c = 0.0;
        }
        let full = ChebyshevSeries::new(coeffs);
        if let Ok(found) = certify_truncation(&full, (1..).step_by(2), target, true) {
            if best.as_ref().is_none_or(|(s, _)| found.0.degree() < s.degree()) {
                best = Some(found);
            }
        }
    }
    let (series, report) = best.ok_or_else(|| {
        Error::Construction(format!("no sign approximant certified for ρ={margin}, τ={tol}"))
    })?;
    let scale = (3.0 / tol).ln() / margin;
    Ok(finish(series, report, Some(margin), tol, scale))
}

fn finish(
    series: ChebyshevSeries,
    report: AuditReport,
    margin: Option<f64>,
    tol: f64,
    degree_scale: f64,
) -> Approximant {
    let poly = series.to_monomial();
    let degree = series.degree();
    let certificate = ApproxCertificate {
        sup_bound: report.sup_abs,
        coeff_l2: poly.coeff_l2(),
        margin,
        tol,
        degree,
        degree_constant: degree as f64 / degree_scale,
        audit_points: AUDIT_POINTS,
        monomial_drift: monomial_drift(&poly, &series),
    };
    Approximant {
        poly,
        series,
        certificate,
    }
}

/// (1 + p)/2 for the sign approximant p: approximates the {0,1} step within
/// τ/2 off the margin band.
pub fn zero_one_sign_approx(margin: f64, tol: f64) -> Result<Approximant> {
    let signed = sign_approx(margin, tol)?;
    let series = signed.series.affine(0.5, 0.5);
    let report = audit(
        |t| series.eval(t),
        AuditTarget::ZeroOneSign {
            margin,
            tol: tol / 2.0,
        },
        AUDIT_POINTS,
    );
    if !report.passed {
        return Err(Error::Construction(
            "affine {0,1} transform failed its audit".into(),
        ));
    }
    let scale = (3.0 / tol).ln() / margin;
    Ok(finish(series, report, Some(margin), tol / 2.0, scale))
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn relu(t: f64) -> f64 {
    t.max(0.0)
}

fn function_approx(
    f: &dyn Fn(f64) -> f64,
    tol: f64,
    degree_scale: f64,
) -> Result<Approximant> {
    let full = ChebyshevSeries::interpolate(f, MAX_DEGREE);
    let target = AuditTarget::Function { f, tol };
    let (series, report) = certify_truncation(&full, 0.., target, false)?;
    Ok(finish(series, report, None, tol, degree_scale))
}

/// Polynomial within ε of the logistic sigmoid on [-1,1]; degree O(log 1/ε).
pub fn sigmoid_approx(eps: f64) -> Result<Approximant> {
    if !(eps > 0.0 && eps < 0.5) {
        return input(format!("sigmoid tolerance must lie in (0, 1/2), got {eps}"));
    }
    function_approx(&sigmoid, eps, (1.0 / eps).ln())
}

/// Polynomial within ε of max(0, t) on [-1,1]; degree O(1/ε).
pub fn relu_approx(eps: f64) -> Result<Approximant> {
    if !(eps > 0.0 && eps < 0.5) {
        return input(format!("ReLU tolerance must lie in (0, 1/2), got {eps}"));
    }
    if eps < 0.02 {
        return Err(Error::Capacity(format!(
            "ReLU tolerance {eps} below the 0.02 desk-scale degree budget"
        )));
    }
    function_approx(&relu, eps, 1.0 / eps)
}

/// Upper bound √((d+1)·(4e)^{2d}·M²) on √Σβ_i² for a degree-d polynomial
/// bounded by M on [-1,1].
pub fn coeff_l2_bound(sup_bound: f64, degree: usize) -> Result<f64> {
    if !(sup_bound >= 0.0) {
        return input("sup bound must be non-negative");
    }
    if degree > 40 {
        return Err(Error::Capacity(format!(
            "coefficient bound for degree {degree} > 40 overflows the desk-scale range"
        )));
    }
    let four_e = 4.0 * std::f64::consts::E;
    Ok(((degree as f64 + 1.0).sqrt()) * four_e.powi(degree as i32) * sup_bound)
}

/// Bound (M·d)^r on √Σ η_i² where p^r = Σ η_i t^i, for a polynomial of
/// degree d with zero constant term and |β_i| ≤ M.
pub fn power_coeff_bound(max_coeff: f64, degree: usize, r: u32) -> Result<f64> {
    if !(max_coeff >= 0.0) {
        return input("coefficient bound must be non-negative");
    }
    if degree == 0 || r == 0 {
        return input("power bound needs d >= 1 and r >= 1");
    }
    let v = (max_coeff * degree as f64).powi(r as i32);
    if !v.is_finite() {
        return Err(Error::Capacity("power coefficient bound overflows".into()));
    }
    Ok(v)
}

/// The element p_w of the multinomial feature space with
/// ⟨p_w, ψ_d(x)⟩ = p(w·x), where d = deg p. Entry for tuple (k_1..k_j) is
/// β_j · w_{k_1}···w_{k_j}, so ‖p_w‖² = Σ_j β_j² ‖w‖^{2j}.
pub fn embed_composition(p: &UnivariatePolynomial, w: &[f64]) -> Result<Vec<f64>> {
    if norm(w) > 1.0 + 1e-12 {
        return input("embedding needs ‖w‖ <= 1");
    }
    let d = p.degree();
    match feature_dimension(w.len(), d) {
        Some(len) if len <= FEATURE_CAPACITY => {}
        _ => {
            return Err(Error::Capacity(format!(
                "embedding for n={}, d={d} exceeds feature capacity",
                w.len()
            )))
        }
    }
    let mut features = explicit_feature_map(w, d)?;
    let n = w.len();
    let mut start = 0;
    let mut width = 1;
    for beta in p.coeffs() {
        for v in &mut features[start..start + width] {
            *v *= beta;
        }
        start += width;
        width *= n;
    }
    Ok(features)
}

/// Certificate for Σ a_i f_i given certificates for each f_i: tolerance
/// Σ|a_i|ε_i, norm bound Σ|a_i|B_i.
pub fn linear_combination_certificate(
    parts: &[(f64, ApproxCertificate)],
) -> Result<ApproxCertificate> {
    let Some((_, first)) = parts.first() else {
        return input("linear combination of zero certificates");
    };
    let weighted = |field: fn(&ApproxCertificate) -> f64| -> f64 {
        parts.iter().map(|(a, c)| a.abs() * field(c)).sum()
    };
    Ok(ApproxCertificate {
        sup_bound: weighted(|c| c.sup_bound),
        coeff_l2: weighted(|c| c.coeff_l2),
        margin: parts
            .iter()
            .filter_map(|(_, c)| c.margin)
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r)))),
        tol: weighted(|c| c.tol),
        degree: parts.iter().map(|(_, c)| c.degree).max().unwrap_or(first.degree),
        degree_constant: parts
            .iter()
            .map(|(_, c)| c.degree_constant)
            .fold(0.0, f64::max),
        audit_points: parts.iter().map(|(_, c)| c.audit_points).min().unwrap_or(0),
        monomial_drift: weighted(|c| c.monomial_drift),
    })
}
