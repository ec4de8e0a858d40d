//! Certification of computed profiles: discrete residual of
//! `−M(D_u)Δu = g̃(u)`, positivity, exponential decay rate and the
//! inverse-rescaling round trip back to the Schrödinger problem.

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::{SourceTerm, TruncatedNonlinearity};
use crate::radial::{dilate, gradient_integral, RadialError, RadialProfile};
use crate::rescaling::KirchhoffModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("decay fit window has {nodes} nodes, need at least {MIN_FIT_NODES}")]
    WindowTooShort { nodes: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

pub const MIN_FIT_NODES: usize = 20;
/// Residual norms ignore the outermost 5% of the radial interval.
const INTERIOR_FRACTION: f64 = 0.95;
const FIT_WINDOW: (f64, f64) = (1e-6, 1e-2);
const SLOPE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    #[serde(rename = "residualL2")]
    pub residual_l2: f64,
    pub residual_sup: f64,
    /// `residualL2 / ‖g̃(u)‖` on the same nodes.
    pub relative_residual: f64,
    pub positivity_ok: bool,
    pub decay_slope: Option<f64>,
    pub expected_slope: Option<f64>,
    pub decay_ok: Option<bool>,
    pub grid_order: Option<f64>,
    /// Coefficient `c` in front of `−Δu`.
    pub coefficient: f64,
    pub gradient_integral: f64,
}

impl Certificate {
    /// Positivity, decay rate (when measurable) and residual below `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.positivity_ok && self.decay_ok != Some(false) && self.relative_residual <= tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayFit {
    pub positivity_ok: bool,
    pub decay_slope: f64,
    pub expected_slope: f64,
    pub decay_ok: bool,
    pub fit_nodes: usize,
}

struct Residual {
    l2: f64,
    sup: f64,
    source_l2: f64,
}

fn residual_norms(u: &RadialProfile, coefficient: f64, tnl: &TruncatedNonlinearity) -> Residual {
    let r = u.grid().nodes();
    let v = u.values();
    let n = r.len();
    let weight_power = u.dim() as f64 - 1.0;
    let cutoff = INTERIOR_FRACTION * u.grid().r_max();
    let (mut sq, mut sup, mut source_sq) = (0.0f64, 0.0f64, 0.0f64);
    for i in 1..n - 1 {
        if r[i] > cutoff {
            break;
        }
        let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        let d2 = 2.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0) / (h0 + h1);
        let d1 = (h0 * h0 * v[i + 1] - h1 * h1 * v[i - 1] + (h1 * h1 - h0 * h0) * v[i]) / (h0 * h1 * (h0 + h1));
        let laplacian = d2 + weight_power / r[i] * d1;
        let source = tnl.g(v[i]);
        let res = -coefficient * laplacian - source;
        let w = r[i].powf(weight_power) * 0.5 * (h0 + h1);
        sq += w * res * res;
        source_sq += w * source * source;
        sup = sup.max(res.abs());
    }
    let surface = u.grid().surface_constant();
    Residual { l2: (surface * sq).sqrt(), sup, source_l2: (surface * source_sq).sqrt() }
}

fn subsampled(u: &RadialProfile) -> Option<RadialProfile> {
    let grid = u.grid().coarsened()?;
    let mut values: Vec<f64> = u.values().iter().step_by(2).copied().collect();
    let mut derivatives: Vec<f64> = u.derivatives().iter().step_by(2).copied().collect();
    if values.len() < grid.len() {
        values.push(*u.values().last().unwrap());
        derivatives.push(*u.derivatives().last().unwrap());
    }
    RadialProfile::new(grid, values, derivatives).ok()
}

/// Slope of `log(r^{(N−1)/2} u)` against `r` on the window
/// `u ∈ [10⁻⁶, 10⁻²]·u(0)`, compared with `−√(m/c)`.
pub fn positivity_decay(u: &RadialProfile, m: f64, c: f64) -> Result<DecayFit> {
    if !(m > 0.0 && c > 0.0) {
        return Err(VerifyError::InvalidInput(format!("need m > 0 and c > 0, got m = {m}, c = {c}")));
    }
    let positivity_ok = u.values().iter().all(|&x| x > 0.0);
    let u0 = u.center_value();
    let power = 0.5 * (u.dim() as f64 - 1.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = u
        .grid()
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(_, &x)| x >= FIT_WINDOW.0 * u0 && x <= FIT_WINDOW.1 * u0)
        .map(|(&r, &x)| (r, (r.powf(power) * x).ln()))
        .unzip();
    if xs.len() < MIN_FIT_NODES {
        return Err(VerifyError::WindowTooShort { nodes: xs.len() });
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let decay_slope = sxy / sxx;
    let expected_slope = -(m / c).sqrt();
    let decay_ok = ((decay_slope - expected_slope) / expected_slope).abs() <= SLOPE_TOLERANCE;
    Ok(DecayFit { positivity_ok, decay_slope, expected_slope, decay_ok, fit_nodes: xs.len() })
}

/// Certificate for `−c Δu = g̃(u)` with a given coefficient `c`.
pub fn residual_certificate(u: &RadialProfile, coefficient: f64, tnl: &TruncatedNonlinearity) -> Result<Certificate> {
    if !(coefficient.is_finite() && coefficient > 0.0) {
        return Err(VerifyError::InvalidInput(format!("coefficient must be positive, got {coefficient}")));
    }
    let fine = residual_norms(u, coefficient, tnl);
    let grid_order = subsampled(u)
        .map(|coarse| residual_norms(&coarse, coefficient, tnl).l2)
        .filter(|&coarse| coarse > 0.0 && fine.l2 > 0.0)
        .map(|coarse| (coarse / fine.l2).log2());
    let (positivity_ok, decay_slope, expected_slope, decay_ok) = match positivity_decay(u, tnl.mass(), coefficient) {
        Ok(fit) => (fit.positivity_ok, Some(fit.decay_slope), Some(fit.expected_slope), Some(fit.decay_ok)),
        Err(_) => (u.values().iter().all(|&x| x > 0.0), None, None, None),
    };
    let relative_residual = if fine.source_l2 > 0.0 { fine.l2 / fine.source_l2 } else { fine.l2 };
    Ok(Certificate {
        residual_l2: fine.l2,
        residual_sup: fine.sup,
        relative_residual,
        positivity_ok,
        decay_slope,
        expected_slope,
        decay_ok,
        grid_order,
        coefficient,
        gradient_integral: gradient_integral(u)?,
    })
}

/// Certificate for the Schrödinger problem `−Δv = g̃(v)`.
pub fn schrodinger_residual(v: &RadialProfile, tnl: &TruncatedNonlinearity) -> Result<Certificate> {
    residual_certificate(v, 1.0, tnl)
}

/// Certificate for `−M(D_u)Δu = g̃(u)`, with `D_u` recomputed from `u`.
pub fn kirchhoff_residual(
    u: &RadialProfile,
    model: &KirchhoffModel,
    tnl: &TruncatedNonlinearity,
) -> Result<Certificate> {
    let c = model.eval(gradient_integral(u)?);
    residual_certificate(u, c, tnl)
}

/// `w = u(√c ·)` with `c = M(D_u)`, certified against `−Δw = g̃(w)`.
pub fn inverse_rescaling_check(
    u: &RadialProfile,
    model: &KirchhoffModel,
    tnl: &TruncatedNonlinearity,
) -> Result<(RadialProfile, Certificate)> {
    let c = model.eval(gradient_integral(u)?);
    if !(c.is_finite() && c > 0.0) {
        return Err(VerifyError::InvalidInput(format!("M(D_u) = {c} is not positive")));
    }
    let w = dilate(u, c.sqrt())?;
    let cert = schrodinger_residual(&w, tnl)?;
    Ok((w, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{truncate, Nonlinearity, ProbeConfig};
    use crate::radial::{solve_schrodinger_ground_state, RadialGrid, SchrodingerSolution, ShootingConfig};
    use crate::rescaling::{construct_kirchhoff_solution, find_tbar, ScanConfig};
    use std::sync::OnceLock;

    fn cubic3() -> TruncatedNonlinearity {
        truncate(&Nonlinearity::cubic(3).unwrap(), &ProbeConfig::default()).unwrap()
    }

    fn ground_state() -> &'static SchrodingerSolution {
        static CELL: OnceLock<SchrodingerSolution> = OnceLock::new();
        CELL.get_or_init(|| {
            let grid = RadialGrid::graded(3, 20.0, 2000, 2.0).unwrap();
            solve_schrodinger_ground_state(&cubic3(), &grid, &ShootingConfig::default()).unwrap()
        })
    }

    #[test]
    fn schrodinger_output_is_certified() {
        let cert = schrodinger_residual(&ground_state().profile, &cubic3()).unwrap();
        assert!(cert.positivity_ok);
        assert!(cert.relative_residual < 1e-3, "{cert:?}");
        assert!(cert.decay_ok.unwrap(), "{cert:?}");
        let order = cert.grid_order.unwrap();
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }

    #[test]
    fn constant_model_reduces_to_schrodinger() {
        let v = &ground_state().profile;
        let model = KirchhoffModel::kirchhoff(1.0, 0.0).unwrap();
        assert_eq!(kirchhoff_residual(v, &model, &cubic3()).unwrap(), schrodinger_residual(v, &cubic3()).unwrap());
        let (w, _) = inverse_rescaling_check(v, &model, &cubic3()).unwrap();
        assert_eq!(w.values(), v.values());
    }

    #[test]
    fn unrescaled_profile_fails_kirchhoff() {
        let tnl = cubic3();
        let v = &ground_state().profile;
        let model = KirchhoffModel::kirchhoff(1.0, 1.0).unwrap();
        let dv = gradient_integral(v).unwrap();
        let tbar = find_tbar(&model, dv, 3, &ScanConfig::default()).unwrap().roots[0];
        let u = construct_kirchhoff_solution(v, &model, tbar, 1e-3).unwrap().profile;
        let good = kirchhoff_residual(&u, &model, &tnl).unwrap();
        let bad = kirchhoff_residual(v, &model, &tnl).unwrap();
        assert!(bad.residual_sup > 10.0 * good.residual_sup, "{} vs {}", bad.residual_sup, good.residual_sup);
        // the dilation slows the decay rate to t̄
        let slope = good.decay_slope.unwrap();
        assert!(((slope + tbar) / tbar).abs() < 0.1, "slope {slope}, tbar {tbar}");
        let (w, back) = inverse_rescaling_check(&u, &model, &tnl).unwrap();
        let dw = gradient_integral(&w).unwrap();
        assert!(((dw - dv) / dv).abs() < 1e-3);
        assert!(back.residual_l2 <= 1.01 * schrodinger_residual(v, &tnl).unwrap().residual_l2);
    }

    #[test]
    fn perturbation_is_detected() {
        let tnl = cubic3();
        let v = &ground_state().profile;
        let model = KirchhoffModel::unit();
        let bump = |r: f64| 0.1 * (-(r - 2.0) * (r - 2.0)).exp();
        let perturbed =
            v.map_values(|r, x, dx| (x + bump(r), if r == 0.0 { dx } else { dx - 2.0 * (r - 2.0) * bump(r) })).unwrap();
        let (_, clean) = inverse_rescaling_check(v, &model, &tnl).unwrap();
        let (_, dirty) = inverse_rescaling_check(&perturbed, &model, &tnl).unwrap();
        assert!(dirty.residual_l2 >= 10.0 * clean.residual_l2);
    }

    #[test]
    fn negative_node_breaks_positivity() {
        let v = &ground_state().profile;
        let flipped = v.map_values(|r, x, dx| if (r - 3.0).abs() < 0.01 { (-x, -dx) } else { (x, dx) }).unwrap();
        let fit = positivity_decay(&flipped, 1.0, 1.0).unwrap();
        assert!(!fit.positivity_ok);
        assert!(!residual_certificate(&flipped, 1.0, &cubic3()).unwrap().positivity_ok);
    }

    #[test]
    fn short_window_is_reported() {
        let grid = RadialGrid::uniform(3, 5.0, 100).unwrap();
        let p = RadialProfile::from_fn(grid, |r| (-r).exp(), |r| -(-r).exp()).unwrap();
        assert!(matches!(positivity_decay(&p, 1.0, 1.0), Err(VerifyError::WindowTooShort { .. })));
    }

    #[test]
    fn decay_of_exact_yukawa_profile() {
        let grid = RadialGrid::uniform(3, 30.0, 3000).unwrap();
        let p = RadialProfile::from_fn(
            grid,
            |r| if r == 0.0 { 2.0 } else { 2.0 * (2.0 * r).tanh() / (2.0 * r) * (-r).exp() },
            |_| 0.0,
        )
        .unwrap();
        let fit = positivity_decay(&p, 4.0, 4.0).unwrap();
        assert!((fit.decay_slope + 1.0).abs() < 0.01, "{fit:?}");
        assert!(fit.decay_ok);
    }
}
