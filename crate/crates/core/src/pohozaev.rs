//! Action and Pohozaev functionals of `−(a + b∫|∇u|²)Δu = g(u)`,
//! dilation onto the Pohozaev set, the nondegeneracy defect, and the
//! ground-state search over rescaled Schrödinger ground states.

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::{SourceTerm, TruncatedNonlinearity};
use crate::numeric::{bisect_root, geomspace};
use crate::radial::{
    dilate, gradient_integral, radial_integral, solve_schrodinger_ground_state, IntegrandMode, RadialError, RadialGrid,
    RadialProfile, SchrodingerSolution, ShootingConfig,
};
use crate::rescaling::{find_tbar, KirchhoffModel, RescalingError, ScanConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PohozaevError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite functional value")]
    NonFinite,
    #[error("no dilation reaches the Pohozaev set: {0}")]
    NotProjectable(String),
    #[error("degenerate input: gradient integral {d} is below tolerance")]
    DegenerateInput { d: f64 },
    #[error("ground states are only searched for N = 3 and N = 4, got N = {0}")]
    UnsupportedDimension(usize),
    #[error("the rescaling equation has no root in the scan range (min of Φ is {phi_min})")]
    NoRoots { phi_min: f64 },
    #[error("candidate {index} misses the Pohozaev set: |P| = {defect} > {bound}")]
    ProjectionMismatch { index: usize, defect: f64, bound: f64 },
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Rescaling(#[from] RescalingError),
}

pub type Result<T> = std::result::Result<T, PohozaevError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KirchhoffParams {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub dim: usize,
}

impl KirchhoffParams {
    pub fn new(a: f64, b: f64, dim: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b >= 0.0) {
            return Err(PohozaevError::InvalidParams(format!("need a > 0 and b >= 0, got a = {a}, b = {b}")));
        }
        if dim < 3 {
            return Err(PohozaevError::InvalidParams(format!("dimension must be at least 3, got {dim}")));
        }
        Ok(Self { a, b, dim })
    }

    pub fn model(&self) -> KirchhoffModel {
        KirchhoffModel::AffineComposite { a: self.a, b: self.b, f: crate::rescaling::InnerFunction::Identity }
    }

    /// `(N−2)/(2N)`.
    fn pohozaev_factor(&self) -> f64 {
        let n = self.dim as f64;
        (n - 2.0) / (2.0 * n)
    }

    /// `(1/N)(a D + ((4−N)b/4) D²)`, the action restricted to the Pohozaev set.
    pub fn reduced_energy(&self, d: f64) -> f64 {
        let n = self.dim as f64;
        (self.a * d + (4.0 - n) * self.b / 4.0 * d * d) / n
    }

    /// Reduced energy of `u(·/θ)` in terms of `D = ∫|∇u|²`.
    pub fn reduced_energy_dilated(&self, theta: f64, d: f64) -> f64 {
        let n = self.dim as f64;
        let e = n - 2.0;
        self.a / n * theta.powf(e) * d + (4.0 - n) * self.b / (4.0 * n) * theta.powf(2.0 * e) * d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub g_int: f64,
    pub action: f64,
    pub pohozaev: f64,
    pub reduced_energy: f64,
    pub natural_defect: f64,
}

impl ActionReport {
    /// All functionals from `D = ∫|∇u|²` and `∫G(u)`.
    pub fn from_integrals(d: f64, g_int: f64, params: &KirchhoffParams) -> Result<Self> {
        let (a, b) = (params.a, params.b);
        let n = params.dim as f64;
        let c = params.pohozaev_factor();
        let report = Self {
            d,
            g_int,
            action: 0.5 * a * d + 0.25 * b * d * d - g_int,
            pohozaev: a * c * d + b * c * d * d - g_int,
            reduced_energy: params.reduced_energy(d),
            natural_defect: -2.0 * a * d + b * (n - 4.0) * d * d,
        };
        let all =
            [report.d, report.g_int, report.action, report.pohozaev, report.reduced_energy, report.natural_defect];
        if all.iter().all(|x| x.is_finite()) {
            Ok(report)
        } else {
            Err(PohozaevError::NonFinite)
        }
    }
}

/// Action, Pohozaev functional, reduced energy and natural-constraint
/// defect of a radial profile.
pub fn evaluate<G>(u: &RadialProfile, params: &KirchhoffParams, big_g: G) -> Result<ActionReport>
where
    G: Fn(f64) -> f64,
{
    let d = gradient_integral(u)?;
    let g_int = radial_integral(u, big_g, IntegrandMode::Values)?;
    ActionReport::from_integrals(d, g_int, params)
}

/// Smallest `θ > 0` with `P(u(·/θ)) = 0`, from `D` and `∫G(u)`.
pub fn projection_theta(d: f64, g_int: f64, params: &KirchhoffParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(PohozaevError::DegenerateInput { d });
    }
    if !(g_int > 0.0) {
        return Err(PohozaevError::NotProjectable(format!("∫G(u) = {g_int} is not positive")));
    }
    let c = params.pohozaev_factor();
    let lin = params.a * c * d;
    let quad = params.b * c * d * d;
    match params.dim {
        // θ² ∫G − θ B D² − A D = 0
        3 => Ok((quad + (quad * quad + 4.0 * g_int * lin).sqrt()) / (2.0 * g_int)),
        // θ² (∫G − B D²) = A D
        4 => {
            if g_int <= quad {
                return Err(PohozaevError::NotProjectable(format!(
                    "∫G(u) = {g_int} does not exceed b(N-2)/(2N) D² = {quad}"
                )));
            }
            Ok((lin / (g_int - quad)).sqrt())
        }
        dim => {
            // p(θ)/θ^{N−2} = A D + B θ^{N−2} D² − θ² ∫G, positive at 0⁺
            let e = dim as f64 - 2.0;
            let reduced = |t: f64| lin + quad * t.powf(e) - t * t * g_int;
            let scan = geomspace(1e-8, 1e8, 1601);
            scan.windows(2)
                .find(|w| reduced(w[0]) > 0.0 && reduced(w[1]) <= 0.0)
                .map(|w| bisect_root(w[0], w[1], 200, reduced))
                .ok_or_else(|| PohozaevError::NotProjectable(format!("no positive root of p(θ) for N = {dim}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub theta: f64,
    pub projected: RadialProfile,
    pub defect: f64,
}

/// Dilate `u` onto the Pohozaev set: `ū = u(·/θ)`.
pub fn project_onto_p<G>(u: &RadialProfile, params: &KirchhoffParams, big_g: G) -> Result<ProjectionResult>
where
    G: Fn(f64) -> f64 + Copy,
{
    let report = evaluate(u, params, big_g)?;
    let theta = projection_theta(report.d, report.g_int, params)?;
    let projected = dilate(u, 1.0 / theta)?;
    let defect = evaluate(&projected, params, big_g)?.pohozaev.abs();
    Ok(ProjectionResult { theta, projected, defect })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NondegeneracyCheck {
    /// `Q(u) = −2aD + b(N−4)D²`.
    pub natural_defect: f64,
    /// `−Q`, positive when the check passes.
    pub margin: f64,
    pub holds: bool,
}

/// `Q(u) < 0`: the Pohozaev set is a manifold at `u` and the Lagrange
/// multiplier of a constrained critical point vanishes.
pub fn nondegeneracy_check(report: &ActionReport, tolerance: f64) -> Result<NondegeneracyCheck> {
    if !(report.d > tolerance) {
        return Err(PohozaevError::DegenerateInput { d: report.d });
    }
    let q = report.natural_defect;
    Ok(NondegeneracyCheck { natural_defect: q, margin: -q, holds: q < 0.0 })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateReport {
    pub tbar: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub g_int: f64,
    pub action: f64,
    pub pohozaev: f64,
    pub reduced_energy: f64,
    pub natural_defect: f64,
}

impl CandidateReport {
    fn new(tbar: f64, r: &ActionReport) -> Self {
        Self {
            tbar,
            d: r.d,
            g_int: r.g_int,
            action: r.action,
            pohozaev: r.pohozaev,
            reduced_energy: r.reduced_energy,
            natural_defect: r.natural_defect,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GroundStateReport {
    pub mu: f64,
    pub selected: usize,
    pub candidates: Vec<CandidateReport>,
    /// `(a/N) D` of the selected candidate; `μ` is bounded below by it.
    pub mu_lower_bound: f64,
    pub schrodinger_beta: f64,
    #[serde(rename = "schrodingerD")]
    pub schrodinger_d: f64,
}

#[derive(Debug, Clone)]
pub struct GroundStateSearch {
    pub report: GroundStateReport,
    pub profiles: Vec<RadialProfile>,
    pub schrodinger: SchrodingerSolution,
}

impl GroundStateSearch {
    pub fn selected_profile(&self) -> &RadialProfile {
        &self.profiles[self.report.selected]
    }
}

/// Settings for [`ground_state_search`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub grid: RadialGrid,
    pub shooting: ShootingConfig,
    pub scan: ScanConfig,
    /// Candidates must satisfy `|P(u)| ≤ tolerance · a D`.
    pub tolerance: f64,
}

/// Enumerate the rescalings `u = v(t̄ ·)` of the Schrödinger ground state
/// that solve the Kirchhoff equation and select the one of least action.
pub fn ground_state_search(
    tnl: &TruncatedNonlinearity,
    params: &KirchhoffParams,
    cfg: &SearchConfig,
) -> Result<GroundStateSearch> {
    if !matches!(params.dim, 3 | 4) {
        return Err(PohozaevError::UnsupportedDimension(params.dim));
    }
    if tnl.dim() != params.dim {
        return Err(PohozaevError::InvalidParams(format!(
            "nonlinearity dimension {} differs from N = {}",
            tnl.dim(),
            params.dim
        )));
    }
    let schrodinger = solve_schrodinger_ground_state(tnl, &cfg.grid, &cfg.shooting)?;
    let v = &schrodinger.profile;
    let dv = gradient_integral(v)?;
    finish_search(tnl, params, cfg, schrodinger.clone(), dv)
}

fn finish_search(
    tnl: &TruncatedNonlinearity,
    params: &KirchhoffParams,
    cfg: &SearchConfig,
    schrodinger: SchrodingerSolution,
    dv: f64,
) -> Result<GroundStateSearch> {
    let model = params.model();
    let roots = find_tbar(&model, dv, params.dim, &cfg.scan)?;
    if roots.roots.is_empty() {
        return Err(PohozaevError::NoRoots { phi_min: roots.phi_min });
    }
    let big_g = |s: f64| tnl.primitive(s);
    let mut candidates = Vec::with_capacity(roots.roots.len());
    let mut profiles = Vec::with_capacity(roots.roots.len());
    for (index, &tbar) in roots.roots.iter().enumerate() {
        let u = dilate(&schrodinger.profile, tbar)?;
        let report = evaluate(&u, params, big_g)?;
        let bound = cfg.tolerance * params.a * report.d;
        if !(report.pohozaev.abs() <= bound) {
            return Err(PohozaevError::ProjectionMismatch { index, defect: report.pohozaev.abs(), bound });
        }
        candidates.push(CandidateReport::new(tbar, &report));
        profiles.push(u);
    }
    let selected =
        candidates.iter().enumerate().min_by(|x, y| x.1.action.total_cmp(&y.1.action)).map(|(i, _)| i).unwrap();
    let mu = candidates[selected].action;
    let mu_lower_bound = params.a / params.dim as f64 * candidates[selected].d;
    Ok(GroundStateSearch {
        report: GroundStateReport {
            mu,
            selected,
            candidates,
            mu_lower_bound,
            schrodinger_beta: schrodinger.beta,
            schrodinger_d: dv,
        },
        profiles,
        schrodinger,
    })
}

/// Ground-state search reusing an already computed Schrödinger ground state.
pub fn ground_state_from_schrodinger(
    tnl: &TruncatedNonlinearity,
    params: &KirchhoffParams,
    cfg: &SearchConfig,
    schrodinger: SchrodingerSolution,
) -> Result<GroundStateSearch> {
    if !matches!(params.dim, 3 | 4) {
        return Err(PohozaevError::UnsupportedDimension(params.dim));
    }
    let dv = gradient_integral(&schrodinger.profile)?;
    finish_search(tnl, params, cfg, schrodinger, dv)
}
