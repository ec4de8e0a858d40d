//! The rescaling `u(x) = v(t̄ x)` that turns a Schrödinger ground state
//! into a Kirchhoff solution: roots of `t² M(t^{2−N} D) = 1`, the relaxed
//! infimum condition, and the smallness thresholds for `M = a + b f`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::ScalarFn;
use crate::numeric::{bisect_predicate, bisect_root, geomspace, minimize_on_scan};
use crate::radial::{dilate, gradient_integral, RadialError, RadialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RescalingError {
    #[error("M is not finite at s = {s}")]
    NonFiniteM { s: f64 },
    #[error("invalid Kirchhoff model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no t with t f(t^((2-N)/2) D) <= 1/(2b) in the scan range")]
    Delta2NotFound,
    #[error("rescaling certificate t^2 M(D_u) = {value} misses 1 by more than {tolerance}")]
    CertificateFailed { value: f64, tolerance: f64 },
    #[error(transparent)]
    Radial(#[from] RadialError),
}

pub type Result<T> = std::result::Result<T, RescalingError>;

/// Inner function `f` of an affine-composite coefficient `a + b f(s)`.
#[derive(Clone)]
pub enum InnerFunction {
    Identity,
    Square,
    Sqrt,
    Log1p,
    Custom { name: String, f: ScalarFn },
}

impl InnerFunction {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "id" | "identity" => Self::Identity,
            "square" => Self::Square,
            "sqrt" => Self::Sqrt,
            "log1p" => Self::Log1p,
            _ => return None,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Identity => "id",
            Self::Square => "square",
            Self::Sqrt => "sqrt",
            Self::Log1p => "log1p",
            Self::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Identity => s,
            Self::Square => s * s,
            Self::Sqrt => s.sqrt(),
            Self::Log1p => s.ln_1p(),
            Self::Custom { f, .. } => f(s),
        }
    }
}

impl fmt::Debug for InnerFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The nonlocal coefficient `M`.
#[derive(Clone)]
pub enum KirchhoffModel {
    General { name: String, m: ScalarFn },
    AffineComposite { a: f64, b: f64, f: InnerFunction },
}

impl fmt::Debug for KirchhoffModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::General { name, .. } => write!(f, "General({name})"),
            Self::AffineComposite { a, b, f: inner } => write!(f, "AffineComposite(a={a}, b={b}, f={inner:?})"),
        }
    }
}

impl KirchhoffModel {
    pub fn affine(a: f64, b: f64, f: InnerFunction) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b >= 0.0) {
            return Err(RescalingError::InvalidModel(format!("need a > 0 and b >= 0, got a = {a}, b = {b}")));
        }
        Ok(Self::AffineComposite { a, b, f })
    }

    /// `M(s) = a + b s`.
    pub fn kirchhoff(a: f64, b: f64) -> Result<Self> {
        Self::affine(a, b, InnerFunction::Identity)
    }

    /// `M ≡ 1`.
    pub fn unit() -> Self {
        Self::AffineComposite { a: 1.0, b: 0.0, f: InnerFunction::Identity }
    }

    pub fn general(name: impl Into<String>, m: ScalarFn) -> Self {
        Self::General { name: name.into(), m }
    }

    /// Named general coefficients: `exp` (`e^s`) and `inv1p` (`1/(1+s)`).
    pub fn general_from_name(name: &str) -> Option<Self> {
        let m: ScalarFn = match name {
            "exp" => Arc::new(f64::exp),
            "inv1p" => Arc::new(|s: f64| 1.0 / (1.0 + s)),
            _ => return None,
        };
        Some(Self::general(name, m))
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::General { m, .. } => m(s),
            Self::AffineComposite { a, b, f } => a + b * f.eval(s),
        }
    }

    fn eval_checked(&self, s: f64) -> Result<f64> {
        let value = self.eval(s);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(RescalingError::NonFiniteM { s })
        }
    }

    /// `(a, b)` for the canonical Kirchhoff coefficient `a + b s`.
    pub fn kirchhoff_params(&self) -> Option<(f64, f64)> {
        match self {
            Self::AffineComposite { a, b, f: InnerFunction::Identity } => Some((*a, *b)),
            _ => None,
        }
    }

    /// Whether `M > 0` on the given probes.
    pub fn positive_on(&self, probes: &[f64]) -> bool {
        probes.iter().all(|&s| self.eval(s) > 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub brackets: usize,
    pub max_bisections: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { t_min: 1e-4, t_max: 1e4, brackets: 400, max_bisections: 200 }
    }
}

impl ScanConfig {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(RescalingError::InvalidInput(format!(
                "scan range [{}, {}] must satisfy 0 < t_min < t_max",
                self.t_min, self.t_max
            )));
        }
        if self.brackets == 0 {
            return Err(RescalingError::InvalidInput("scan needs at least one bracket".into()));
        }
        Ok(geomspace(self.t_min, self.t_max, self.brackets + 1))
    }
}

fn check_inputs(d: f64, dim: usize) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(RescalingError::InvalidInput(format!("gradient integral must be positive, got {d}")));
    }
    if dim < 3 {
        return Err(RescalingError::InvalidInput(format!("dimension must be at least 3, got {dim}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RescalingResult {
    #[serde(rename = "D")]
    pub d: f64,
    pub roots: Vec<f64>,
    pub residuals: Vec<f64>,
    pub scan_range: [f64; 2],
    /// Smallest value of `Φ` seen on the scan, refined locally.
    pub phi_min: f64,
    pub phi_argmin: f64,
}

/// All roots of `Φ(t) = t² M(t^{2−N} D) − 1` on the logarithmic scan.
pub fn find_tbar(model: &KirchhoffModel, d: f64, dim: usize, cfg: &ScanConfig) -> Result<RescalingResult> {
    check_inputs(d, dim)?;
    let points = cfg.points()?;
    let exponent = 2.0 - dim as f64;
    let phi = |t: f64| -> Result<f64> {
        let s = t.powf(exponent) * d;
        Ok(t * t * model.eval_checked(s)? - 1.0)
    };
    let mut values = Vec::with_capacity(points.len());
    for &t in &points {
        values.push(phi(t)?);
    }
    let mut roots = Vec::new();
    for k in 0..points.len() {
        if values[k] == 0.0 {
            roots.push(points[k]);
        } else if k + 1 < points.len() && values[k + 1] != 0.0 && values[k].signum() != values[k + 1].signum() {
            let root = bisect_root(points[k], points[k + 1], cfg.max_bisections, |t| {
                let s = t.powf(exponent) * d;
                t * t * model.eval(s) - 1.0
            });
            roots.push(root);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    let mut residuals = Vec::with_capacity(roots.len());
    for &t in &roots {
        residuals.push(phi(t)?.abs());
    }
    let (phi_argmin, phi_min) = minimize_on_scan(&points, true, |t| t * t * model.eval(t.powf(exponent) * d) - 1.0);
    Ok(RescalingResult { d, roots, residuals, scan_range: [cfg.t_min, cfg.t_max], phi_min, phi_argmin })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RelaxedCondition {
    pub holds: bool,
    pub min_value: f64,
    pub argmin: f64,
}

/// `inf_t t M(t^{(2−N)/2} D) ≤ 1` over the scan range.
pub fn check_relaxed_condition(
    model: &KirchhoffModel,
    d: f64,
    dim: usize,
    cfg: &ScanConfig,
) -> Result<RelaxedCondition> {
    check_inputs(d, dim)?;
    let points = cfg.points()?;
    let exponent = 0.5 * (2.0 - dim as f64);
    for &t in &points {
        model.eval_checked(t.powf(exponent) * d)?;
    }
    let (argmin, min_value) = minimize_on_scan(&points, true, |t| t * model.eval(t.powf(exponent) * d));
    Ok(RelaxedCondition { holds: min_value <= 1.0, min_value, argmin })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Delta2Status {
    Found,
    /// `liminf_{t→0} t^{2/(2−N)} f(t) = 0` fails on the sampled window.
    HyppFails,
    NotFound,
    /// `b = 0`: `Ψ(t) = a t` and no smallness of `a` is needed.
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdReport {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub h_bar: f64,
    /// `a / h̄`; `None` when `h̄ = 0` (no restriction on `b`).
    pub delta1: Option<f64>,
    pub psi_at_half_inv_a: f64,
    pub b_within_delta1: bool,
    /// `b ≤ δ₁ ⇒ Ψ(1/(2a)) ≤ 1` held for this model.
    pub delta1_certified: bool,
    pub hypp_holds: bool,
    pub delta2_status: Delta2Status,
    pub delta2: Option<f64>,
    pub delta2_tbar: Option<f64>,
    /// `Ψ(t̄)` evaluated with `a = δ₂`.
    pub psi_at_tbar: Option<f64>,
}

impl ThresholdReport {
    pub fn require_delta2(&self) -> Result<f64> {
        self.delta2.ok_or(RescalingError::Delta2NotFound)
    }
}

/// Sampled test of `liminf_{t→0} t^{2/(2−N)} f(t) = 0`.
pub fn hypp_holds(f: &InnerFunction, dim: usize) -> bool {
    let exponent = 2.0 / (2.0 - dim as f64);
    let samples: Vec<f64> =
        geomspace(1e-15, 1e-2, 14).into_iter().rev().map(|t| t.powf(exponent) * f.eval(t)).collect();
    let (first, last) = (samples[0], *samples.last().unwrap());
    last.is_finite() && last < first && last <= 1e-3 * first.max(1.0)
}

/// Smallness thresholds for `M = a + b f`.
pub fn thresholds(model: &KirchhoffModel, d: f64, dim: usize, cfg: &ScanConfig) -> Result<ThresholdReport> {
    check_inputs(d, dim)?;
    let KirchhoffModel::AffineComposite { a, b, f } = model else {
        return Err(RescalingError::InvalidModel("thresholds need an affine-composite coefficient".into()));
    };
    let (a, b) = (*a, *b);
    let half = 0.5 * (2.0 - dim as f64);
    let psi = |t: f64, a: f64| t * (a + b * f.eval(t.powf(half) * d));

    let h_bar = f.eval((2.0 * a).powf(-half) * d);
    if !h_bar.is_finite() {
        return Err(RescalingError::NonFiniteM { s: (2.0 * a).powf(-half) * d });
    }
    let delta1 = (h_bar > 0.0).then(|| a / h_bar);
    let psi_at_half_inv_a = psi(0.5 / a, a);
    let b_within_delta1 = delta1.is_none_or(|d1| b <= d1);
    let delta1_certified = !b_within_delta1 || psi_at_half_inv_a <= 1.0 + 8.0 * f64::EPSILON;

    let hypp = hypp_holds(f, dim);
    let (delta2_status, delta2_tbar) = if b == 0.0 {
        (Delta2Status::NotApplicable, None)
    } else if !hypp {
        (Delta2Status::HyppFails, None)
    } else {
        let points = cfg.points()?;
        let limit = 0.5 / b;
        let feasible = |t: f64| t * f.eval(t.powf(half) * d) <= limit;
        match points.iter().position(|&t| feasible(t)) {
            None => (Delta2Status::NotFound, None),
            Some(0) => (Delta2Status::Found, Some(points[0])),
            Some(k) => {
                let (lo, hi) = bisect_predicate(points[k - 1], points[k], cfg.max_bisections, feasible);
                let tbar = if feasible(lo) { lo } else { hi };
                (Delta2Status::Found, Some(tbar))
            }
        }
    };
    let delta2 = delta2_tbar.map(|t| 0.5 / t);
    let psi_at_tbar = delta2_tbar.zip(delta2).map(|(t, a2)| psi(t, a2));

    Ok(ThresholdReport {
        a,
        b,
        dim,
        d,
        h_bar,
        delta1,
        psi_at_half_inv_a,
        b_within_delta1,
        delta1_certified,
        hypp_holds: hypp,
        delta2_status,
        delta2,
        delta2_tbar,
        psi_at_tbar,
    })
}

#[derive(Debug, Clone)]
pub struct KirchhoffSolution {
    pub profile: RadialProfile,
    pub tbar: f64,
    pub summary: RescalingCertificate,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RescalingCertificate {
    pub tbar: f64,
    /// `D_u` recomputed from the rescaled profile.
    pub gradient_integral: f64,
    /// `M(D_u)`.
    pub coefficient: f64,
    /// `t̄² M(D_u)`, which must equal 1.
    pub value: f64,
    pub defect: f64,
    pub tolerance: f64,
}

/// `u = v(t̄ ·)`, certified by recomputing `t̄² M(D_u) = 1`.
pub fn construct_kirchhoff_solution(
    v: &RadialProfile,
    model: &KirchhoffModel,
    tbar: f64,
    tolerance: f64,
) -> Result<KirchhoffSolution> {
    if !(tbar.is_finite() && tbar > 0.0) {
        return Err(RescalingError::InvalidInput(format!("rescaling root must be positive, got {tbar}")));
    }
    let profile = dilate(v, tbar)?;
    let du = gradient_integral(&profile)?;
    let coefficient = model.eval_checked(du)?;
    let value = tbar * tbar * coefficient;
    let defect = (value - 1.0).abs();
    if !(defect <= tolerance) {
        return Err(RescalingError::CertificateFailed { value, tolerance });
    }
    Ok(KirchhoffSolution {
        profile,
        tbar,
        summary: RescalingCertificate { tbar, gradient_integral: du, coefficient, value, defect, tolerance },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_root(a: f64, b: f64, d: f64) -> f64 {
        ((b * b * d * d + 4.0 * a).sqrt() - b * d) / (2.0 * a)
    }

    #[test]
    fn constant_coefficient_root() {
        let model = KirchhoffModel::kirchhoff(4.0, 0.0).unwrap();
        let res = find_tbar(&model, 3.0, 3, &ScanConfig::default()).unwrap();
        assert_eq!(res.roots.len(), 1);
        assert!((res.roots[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kirchhoff_three_dimensional_root() {
        let model = KirchhoffModel::kirchhoff(1.0, 1.0).unwrap();
        let res = find_tbar(&model, 2.0, 3, &ScanConfig::default()).unwrap();
        assert_eq!(res.roots.len(), 1);
        assert!((res.roots[0] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((res.roots[0] - quadratic_root(1.0, 1.0, 2.0)).abs() < 1e-14);
        assert!(res.residuals[0] < 1e-14);
    }

    #[test]
    fn five_dimensional_kirchhoff_has_no_root() {
        let model = KirchhoffModel::kirchhoff(1.0, 1.0).unwrap();
        let res = find_tbar(&model, 1.0, 5, &ScanConfig::default()).unwrap();
        assert!(res.roots.is_empty());
        // t^2 + 1/t - 1 is minimal at t = 2^(-1/3)
        assert!((res.phi_min - (3.0 * 2f64.powf(-2.0 / 3.0) - 1.0)).abs() < 1e-9);
        assert!((res.phi_argmin - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-5);
    }

    #[test]
    fn relaxed_condition_examples() {
        let cfg = ScanConfig::default();
        let r = check_relaxed_condition(&KirchhoffModel::kirchhoff(1.0, 1.0).unwrap(), 1.0, 5, &cfg).unwrap();
        assert!(!r.holds);
        let t_star = 0.5f64.powf(2.0 / 3.0);
        assert!((r.argmin - t_star).abs() < 1e-5);
        assert!((r.min_value - (t_star + t_star.powf(-0.5))).abs() < 1e-10);

        let r = check_relaxed_condition(&KirchhoffModel::kirchhoff(0.1, 1.0).unwrap(), 1.0, 5, &cfg).unwrap();
        assert!(r.holds);
        let t_star = 5f64.powf(2.0 / 3.0);
        assert!((r.argmin - t_star).abs() < 1e-4);
        assert!((r.min_value - (0.1 * t_star + t_star.powf(-0.5))).abs() < 1e-10);

        let r = check_relaxed_condition(&KirchhoffModel::unit(), 1.0, 4, &cfg).unwrap();
        assert!(r.holds);
        assert!((r.min_value - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn non_finite_coefficient_is_reported() {
        let model = KirchhoffModel::general("blowup", Arc::new(|s: f64| if s > 1e3 { f64::INFINITY } else { 1.0 }));
        let err = find_tbar(&model, 1.0, 3, &ScanConfig::default()).unwrap_err();
        assert!(matches!(err, RescalingError::NonFiniteM { .. }));
    }

    #[test]
    fn thresholds_three_dimensional_identity() {
        let model = KirchhoffModel::kirchhoff(0.5, 0.5).unwrap();
        let rep = thresholds(&model, 1.0, 3, &ScanConfig::default()).unwrap();
        assert!((rep.h_bar - 1.0).abs() < 1e-15);
        assert!((rep.delta1.unwrap() - 0.5).abs() < 1e-15);
        assert!((rep.psi_at_half_inv_a - 1.0).abs() < 1e-15);
        assert!(rep.b_within_delta1 && rep.delta1_certified);
        assert_eq!(rep.delta2_status, Delta2Status::HyppFails);
        assert_eq!(rep.require_delta2().unwrap_err(), RescalingError::Delta2NotFound);

        let over = thresholds(&KirchhoffModel::kirchhoff(0.5, 0.6).unwrap(), 1.0, 3, &ScanConfig::default()).unwrap();
        assert!(!over.b_within_delta1);
        assert!(over.psi_at_half_inv_a > 1.0);
    }

    #[test]
    fn thresholds_five_dimensional_delta2() {
        let model = KirchhoffModel::kirchhoff(1.0, 1.0).unwrap();
        let rep = thresholds(&model, 1.0, 5, &ScanConfig::default()).unwrap();
        assert!(rep.hypp_holds);
        assert_eq!(rep.delta2_status, Delta2Status::Found);
        assert!((rep.delta2_tbar.unwrap() - 4.0).abs() < 1e-10);
        assert!((rep.delta2.unwrap() - 0.125).abs() < 1e-11);
        assert!(rep.psi_at_tbar.unwrap() <= 1.0);
        // with a exactly 1/8 and t = 4: 4 (1/8 + 4^{-3/2}) = 1
        assert!((4.0 * (0.125 + 4f64.powf(-1.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_b_needs_no_thresholds() {
        let model = KirchhoffModel::kirchhoff(3.0, 0.0).unwrap();
        let rep = thresholds(&model, 2.0, 4, &ScanConfig::default()).unwrap();
        assert!((rep.psi_at_half_inv_a - 0.5).abs() < 1e-15);
        assert_eq!(rep.delta2_status, Delta2Status::NotApplicable);
    }

    #[test]
    fn hypp_matches_dimension_rule_for_identity() {
        assert!(!hypp_holds(&InnerFunction::Identity, 3));
        assert!(!hypp_holds(&InnerFunction::Identity, 4));
        assert!(hypp_holds(&InnerFunction::Identity, 5));
        assert!(hypp_holds(&InnerFunction::Identity, 7));
        assert!(hypp_holds(&InnerFunction::Square, 4));
    }

    #[test]
    fn thresholds_reject_general_models() {
        let model = KirchhoffModel::general_from_name("exp").unwrap();
        assert!(matches!(thresholds(&model, 1.0, 3, &ScanConfig::default()), Err(RescalingError::InvalidModel(_))));
    }

    #[test]
    fn general_coefficient_roots_are_certified() {
        // t^2 / (1 + 1.5/t) = 1, i.e. t^3 = t + 1.5
        let model = KirchhoffModel::general_from_name("inv1p").unwrap();
        let res = find_tbar(&model, 1.5, 3, &ScanConfig::default()).unwrap();
        assert_eq!(res.roots.len(), 1);
        let t = res.roots[0];
        assert!((t * t * t - t - 1.5).abs() < 1e-12);
        // e^{1.5/t} overflows at the bottom of the scan
        let exp = KirchhoffModel::general_from_name("exp").unwrap();
        assert!(matches!(find_tbar(&exp, 1.5, 3, &ScanConfig::default()), Err(RescalingError::NonFiniteM { .. })));
    }
}
