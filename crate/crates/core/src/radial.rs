//! Radial profiles on `R^N`: grids and quadrature for `∫_{R^N}`, the
//! shooting solver for the radial Schrödinger ground state
//! `v'' + (N−1)/r v' + g̃(v) = 0`, dilation and monotone resampling, and
//! CSV persistence.

use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::nonlinearity::{SourceTerm, TruncatedNonlinearity};
use crate::numeric::{bisect_predicate, geomspace, unit_sphere_area};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("shooting bracket [{lo}, {hi}] is invalid: both ends {outcome:?}")]
    BracketInvalid { lo: f64, hi: f64, outcome: Outcome },
    #[error("shooting did not converge: {0}")]
    NoConvergence(String),
    #[error("the shooting dichotomy needs a positive mass")]
    MassRequired,
    #[error("invalid radial grid: {0}")]
    InvalidGrid(String),
    #[error("invalid radial profile: {0}")]
    InvalidProfile(String),
    #[error("invalid shooting configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite radial integral")]
    NonFiniteIntegral,
    #[error("profile csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, RadialError>;

/// Nodes `0 = r_0 < … < r_K = r_max` together with the quadrature
/// measure for `∫_{R^N} f(|x|) dx = ω_{N−1} ∫_0^∞ f(r) r^{N−1} dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    nodes: Vec<f64>,
    surface: f64,
    /// Quadrature weight of each node, including `ω_{N−1} r^{N−1}`.
    measure: Vec<f64>,
}

pub const MIN_INTERVALS: usize = 100;

impl RadialGrid {
    pub fn from_nodes(dim: usize, nodes: Vec<f64>) -> Result<Self> {
        if dim < 3 {
            return Err(RadialError::InvalidGrid(format!("dimension {dim} < 3")));
        }
        if nodes.len() < MIN_INTERVALS + 1 {
            return Err(RadialError::InvalidGrid(format!(
                "{} intervals, need at least {MIN_INTERVALS}",
                nodes.len().saturating_sub(1)
            )));
        }
        if nodes[0] != 0.0 {
            return Err(RadialError::InvalidGrid("first node must be r = 0".into()));
        }
        if nodes.iter().any(|r| !r.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RadialError::InvalidGrid("nodes must increase strictly".into()));
        }
        Ok(Self::assemble(dim, nodes))
    }

    fn assemble(dim: usize, nodes: Vec<f64>) -> Self {
        let surface = unit_sphere_area(dim);
        let weights = simpson_weights(&nodes);
        let measure = nodes.iter().zip(&weights).map(|(r, w)| surface * w * r.powi(dim as i32 - 1)).collect();
        Self { dim, nodes, surface, measure }
    }

    pub fn uniform(dim: usize, r_max: f64, intervals: usize) -> Result<Self> {
        Self::graded(dim, r_max, intervals, 0.0)
    }

    /// `r_i = r_max · sinh(κ i/K) / sinh(κ)`: a smooth map of a uniform
    /// grid, denser near the origin for `κ > 0`.
    pub fn graded(dim: usize, r_max: f64, intervals: usize, grading: f64) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(RadialError::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if !(grading.is_finite() && grading >= 0.0) {
            return Err(RadialError::InvalidGrid(format!("grading must be >= 0, got {grading}")));
        }
        let k = intervals as f64;
        let nodes = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    r_max
                } else if grading == 0.0 {
                    r_max * i as f64 / k
                } else {
                    r_max * (grading * i as f64 / k).sinh() / grading.sinh()
                }
            })
            .collect();
        Self::from_nodes(dim, nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
    /// `ω_{N−1} = 2π^{N/2}/Γ(N/2)`.
    pub fn surface_constant(&self) -> f64 {
        self.surface
    }
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Nodes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::assemble(self.dim, self.nodes.iter().map(|r| r * factor).collect())
    }

    /// Every other node, keeping the last one.
    pub fn coarsened(&self) -> Option<Self> {
        let mut nodes: Vec<f64> = self.nodes.iter().step_by(2).copied().collect();
        if *nodes.last().unwrap() != self.r_max() {
            nodes.push(self.r_max());
        }
        (nodes.len() > MIN_INTERVALS).then(|| Self::assemble(self.dim, nodes))
    }

    /// Append nodes at the last spacing until `r_max` is reached.
    pub fn extended(&self, r_max: f64) -> Self {
        let mut nodes = self.nodes.clone();
        let n = nodes.len();
        let h = nodes[n - 1] - nodes[n - 2];
        let mut r = nodes[n - 1];
        while r + h < r_max * (1.0 + 1e-12) {
            r += h;
            nodes.push(r);
        }
        Self::assemble(self.dim, nodes)
    }
}

/// Composite Simpson weights on a nonuniform grid; a trailing odd
/// interval is integrated with the parabola through the last three nodes.
fn simpson_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let mut i = 0;
    while i + 2 <= intervals {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let s = h0 + h1;
        w[i] += s / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += s * s * s / (6.0 * h0 * h1);
        w[i + 2] += s / 6.0 * (2.0 - h0 / h1);
        i += 2;
    }
    if i < intervals {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        w[i + 1] += h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        w[i] += h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        w[i - 1] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    w
}

/// A radial function sampled with its derivative on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
    derivatives: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>, derivatives: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || derivatives.len() != grid.len() {
            return Err(RadialError::InvalidProfile("length does not match the grid".into()));
        }
        if values.iter().chain(&derivatives).any(|x| !x.is_finite()) {
            return Err(RadialError::InvalidProfile("non-finite sample".into()));
        }
        if derivatives[0] != 0.0 {
            return Err(RadialError::InvalidProfile("v'(0) must vanish".into()));
        }
        Ok(Self { grid, values, derivatives })
    }

    pub fn from_fn<F, D>(grid: RadialGrid, value: F, derivative: D) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let values = grid.nodes().iter().map(|&r| value(r)).collect();
        let mut derivatives: Vec<f64> = grid.nodes().iter().map(|&r| derivative(r)).collect();
        derivatives[0] = 0.0;
        Self::new(grid, values, derivatives)
    }

    pub fn zero(grid: RadialGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], derivatives: vec![0.0; n] }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }
    pub fn center_value(&self) -> f64 {
        self.values[0]
    }

    /// Same grid, values replaced.
    pub fn map_values<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> (f64, f64),
    {
        let (values, derivatives) = self
            .grid
            .nodes()
            .iter()
            .zip(self.values.iter().zip(&self.derivatives))
            .map(|(&r, (&v, &dv))| f(r, v, dv))
            .unzip();
        Self::new(self.grid.clone(), values, derivatives)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrandMode {
    /// `φ(v(r))`
    Values,
    /// `φ(v'(r)²)`
    DerivativesSquared,
}

/// `∫_{R^N} φ` of the profile, by composite Simpson in `r`.
pub fn radial_integral<F>(p: &RadialProfile, integrand: F, mode: IntegrandMode) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let samples = match mode {
        IntegrandMode::Values => &p.values,
        IntegrandMode::DerivativesSquared => &p.derivatives,
    };
    let total: f64 = samples
        .iter()
        .zip(p.grid.measure())
        .map(|(&x, &w)| {
            let arg = match mode {
                IntegrandMode::Values => x,
                IntegrandMode::DerivativesSquared => x * x,
            };
            w * integrand(arg)
        })
        .sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(RadialError::NonFiniteIntegral)
    }
}

/// `D = ∫_{R^N} |∇v|²`.
pub fn gradient_integral(p: &RadialProfile) -> Result<f64> {
    radial_integral(p, |x| x, IntegrandMode::DerivativesSquared)
}

/// `r ↦ p(t r)`, carried on the grid scaled by `1/t`.
pub fn dilate(p: &RadialProfile, t: f64) -> Result<RadialProfile> {
    if !(t.is_finite() && t > 0.0) {
        return Err(RadialError::InvalidConfig(format!("dilation factor must be positive, got {t}")));
    }
    Ok(RadialProfile {
        grid: p.grid.scaled(1.0 / t),
        values: p.values.clone(),
        derivatives: p.derivatives.iter().map(|d| d * t).collect(),
    })
}

/// Monotone cubic Hermite value and slope at `r`, using the stored
/// derivatives limited per interval (Fritsch–Carlson). `None` outside
/// the grid.
pub fn interpolate(p: &RadialProfile, r: f64) -> Option<(f64, f64)> {
    let x = p.grid.nodes();
    if !(r >= 0.0 && r <= p.grid.r_max()) {
        return None;
    }
    let k = (x.partition_point(|&xi| xi <= r).max(1) - 1).min(x.len() - 2);
    let h = x[k + 1] - x[k];
    let (y0, y1) = (p.values[k], p.values[k + 1]);
    let secant = (y1 - y0) / h;
    let (mut d0, mut d1) = (p.derivatives[k], p.derivatives[k + 1]);
    if secant == 0.0 {
        d0 = 0.0;
        d1 = 0.0;
    } else {
        let (a, b) = (d0 / secant, d1 / secant);
        if a < 0.0 {
            d0 = 0.0;
        }
        if b < 0.0 {
            d1 = 0.0;
        }
        let (a, b) = (d0 / secant, d1 / secant);
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            d0 = tau * a * secant;
            d1 = tau * b * secant;
        }
    }
    let s = (r - x[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let slope = ((6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * h * d1)
        / h;
    Some((value, slope))
}

/// Resample onto `grid`, which must not extend beyond the source grid.
pub fn resample(p: &RadialProfile, grid: &RadialGrid) -> Result<RadialProfile> {
    if grid.dim() != p.dim() {
        return Err(RadialError::InvalidGrid("dimension mismatch".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut derivatives = Vec::with_capacity(grid.len());
    for &r in grid.nodes() {
        // allow the last node to overshoot by rounding
        let r = if r > p.grid.r_max() && r <= p.grid.r_max() * (1.0 + 1e-12) { p.grid.r_max() } else { r };
        let (v, dv) = interpolate(p, r).ok_or_else(|| {
            RadialError::InvalidGrid(format!("target node {r} lies beyond r_max = {}", p.grid.r_max()))
        })?;
        values.push(v);
        derivatives.push(dv);
    }
    derivatives[0] = 0.0;
    RadialProfile::new(grid.clone(), values, derivatives)
}

/// Dilate and resample onto a prescribed grid.
pub fn dilate_onto(p: &RadialProfile, t: f64, grid: &RadialGrid) -> Result<RadialProfile> {
    resample(&dilate(p, t)?, grid)
}

pub fn write_csv<W: Write>(p: &RadialProfile, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,v,dv")?;
    for ((r, v), dv) in p.grid.nodes().iter().zip(&p.values).zip(&p.derivatives) {
        writeln!(out, "{r:?},{v:?},{dv:?}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R, dim: usize) -> Result<RadialProfile> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| RadialError::Csv("empty input".into()))?
        .map_err(|e| RadialError::Csv(e.to_string()))?;
    if header.trim() != "r,v,dv" {
        return Err(RadialError::Csv(format!("expected header `r,v,dv`, found `{header}`")));
    }
    let (mut r, mut v, mut dv) = (Vec::new(), Vec::new(), Vec::new());
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| RadialError::Csv(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(RadialError::Csv(format!("line {}: expected 3 fields", lineno + 2)));
        }
        let parse =
            |s: &str| s.trim().parse::<f64>().map_err(|e| RadialError::Csv(format!("line {}: {e}", lineno + 2)));
        r.push(parse(fields[0])?);
        v.push(parse(fields[1])?);
        dv.push(parse(fields[2])?);
    }
    RadialProfile::new(RadialGrid::from_nodes(dim, r)?, v, dv)
}

/// How a shot from `v(0) = β` leaves the ground-state manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// `v` becomes negative: `β` is above the ground-state value.
    Crossing,
    /// `v'` turns positive while `v > 0` (or `v` never crosses): `β` is below.
    Turning,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShootingConfig {
    /// `[β_lo, β_hi]`; located automatically when absent.
    pub bracket: Option<(f64, f64)>,
    pub blowup_threshold: f64,
    /// Post-hoc target for `v(r_max)/v(0)`; the grid is extended otherwise.
    pub vanish_tolerance: f64,
    /// Relative gap between the two final shots beyond which the
    /// trajectory is replaced by its linearized decaying tail.
    pub divergence_tolerance: f64,
    pub max_bisections: usize,
    /// Classification integrates up to `horizon_factor · r_max`.
    pub horizon_factor: f64,
    pub max_extensions: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            bracket: None,
            blowup_threshold: 1e8,
            vanish_tolerance: 1e-8,
            divergence_tolerance: 1e-4,
            max_bisections: 200,
            horizon_factor: 4.0,
            max_extensions: 3,
        }
    }
}

impl ShootingConfig {
    fn check(&self) -> Result<()> {
        if let Some((lo, hi)) = self.bracket {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(RadialError::InvalidConfig(format!("bracket [{lo}, {hi}] must be ordered")));
            }
        }
        if !(self.blowup_threshold > 0.0
            && self.vanish_tolerance > 0.0
            && self.divergence_tolerance > 0.0
            && self.horizon_factor >= 1.0)
        {
            return Err(RadialError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_bisections == 0 {
            return Err(RadialError::InvalidConfig("max_bisections must be positive".into()));
        }
        Ok(())
    }
}

struct Shot {
    values: Vec<f64>,
    derivatives: Vec<f64>,
    outcome: Outcome,
}

fn shoot(tnl: &TruncatedNonlinearity, nodes: &[f64], beta: f64, horizon: f64, blowup: f64, record: bool) -> Shot {
    let n = tnl.dim() as f64;
    let accel = |r: f64, v: f64, w: f64| -(n - 1.0) / r * w - tnl.g(v);
    let event = |v: f64, w: f64| {
        if v < 0.0 {
            Some(Outcome::Crossing)
        } else if (w > 0.0 && v > 0.0) || !(v.abs() <= blowup) {
            Some(Outcome::Turning)
        } else {
            None
        }
    };
    let step = |r: f64, h: f64, v: f64, w: f64| {
        let (k1v, k1w) = (w, accel(r, v, w));
        let (k2v, k2w) = (w + 0.5 * h * k1w, accel(r + 0.5 * h, v + 0.5 * h * k1v, w + 0.5 * h * k1w));
        let (k3v, k3w) = (w + 0.5 * h * k2w, accel(r + 0.5 * h, v + 0.5 * h * k2v, w + 0.5 * h * k2w));
        let (k4v, k4w) = (w + h * k3w, accel(r + h, v + h * k3v, w + h * k3w));
        (v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v), w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))
    };

    let mut values = Vec::with_capacity(if record { nodes.len() } else { 0 });
    let mut derivatives = Vec::with_capacity(values.capacity());
    if record {
        values.push(beta);
        derivatives.push(0.0);
    }
    // series start across the coordinate singularity
    let h1 = nodes[1];
    let g_beta = tnl.g(beta);
    let mut v = beta - g_beta * h1 * h1 / (2.0 * n);
    let mut w = -g_beta * h1 / n;
    let finish = |values: &mut Vec<f64>, derivatives: &mut Vec<f64>, outcome| Shot {
        values: std::mem::take(values),
        derivatives: std::mem::take(derivatives),
        outcome,
    };
    if let Some(o) = event(v, w) {
        return finish(&mut values, &mut derivatives, o);
    }
    if record {
        values.push(v);
        derivatives.push(w);
    }
    for i in 1..nodes.len() - 1 {
        (v, w) = step(nodes[i], nodes[i + 1] - nodes[i], v, w);
        if let Some(o) = event(v, w) {
            return finish(&mut values, &mut derivatives, o);
        }
        if record {
            values.push(v);
            derivatives.push(w);
        }
    }
    let last = nodes.len() - 1;
    let h = nodes[last] - nodes[last - 1];
    let mut r = nodes[last];
    while r < horizon {
        (v, w) = step(r, h, v, w);
        r += h;
        if let Some(o) = event(v, w) {
            return finish(&mut values, &mut derivatives, o);
        }
    }
    finish(&mut values, &mut derivatives, Outcome::Turning)
}

/// Classify a single shot from `v(0) = beta`.
pub fn classify(tnl: &TruncatedNonlinearity, grid: &RadialGrid, beta: f64, cfg: &ShootingConfig) -> Outcome {
    let horizon = cfg.horizon_factor * grid.r_max();
    shoot(tnl, grid.nodes(), beta, horizon, cfg.blowup_threshold, false).outcome
}

/// Output of the shooting solver.
#[derive(Debug, Clone)]
pub struct SchrodingerSolution {
    pub profile: RadialProfile,
    pub beta: f64,
    /// Final bracket; both ends are adjacent or within a few ulps.
    pub bracket: (f64, f64),
    pub bisections: usize,
    /// Radius from which the linearized tail replaces the trajectory
    /// (`None` if the shots agree up to `r_max`).
    pub tail_start: Option<f64>,
}

fn auto_bracket(tnl: &TruncatedNonlinearity, grid: &RadialGrid, cfg: &ShootingConfig) -> Result<(f64, f64)> {
    let zeta = tnl.base().zeta();
    let scan = geomspace(1e-6 * zeta, zeta, 4001);
    // first point where g̃ turns positive
    let mut lo = None;
    for w in scan.windows(2) {
        if tnl.g(w[0]) <= 0.0 && tnl.g(w[1]) > 0.0 {
            let (a, _) = bisect_predicate(w[0], w[1], 200, |s| tnl.g(s) > 0.0);
            lo = Some(a * (1.0 - 1e-3));
            break;
        }
    }
    let lo = lo.unwrap_or(1e-6 * zeta);
    let lo_outcome = classify(tnl, grid, lo, cfg);
    let candidates: Vec<f64> = if tnl.s0().is_finite() {
        let s0 = tnl.s0();
        (1..=50).map(|k| s0 - (s0 - lo) * 0.5f64.powi(k)).collect()
    } else {
        (1..=30).map(|k| lo * 2f64.powi(k)).collect()
    };
    for hi in candidates {
        if classify(tnl, grid, hi, cfg) != lo_outcome {
            return Ok((lo, hi));
        }
    }
    Err(RadialError::BracketInvalid { lo, hi: lo * 2f64.powi(30), outcome: lo_outcome })
}

/// Radial ground state of `−Δv = g̃(v)` by bisection on the shooting
/// dichotomy.
pub fn solve_schrodinger_ground_state(
    tnl: &TruncatedNonlinearity,
    grid: &RadialGrid,
    cfg: &ShootingConfig,
) -> Result<SchrodingerSolution> {
    cfg.check()?;
    if !(tnl.mass() > 0.0) {
        return Err(RadialError::MassRequired);
    }
    if grid.dim() != tnl.dim() {
        return Err(RadialError::InvalidGrid(format!(
            "grid dimension {} differs from nonlinearity dimension {}",
            grid.dim(),
            tnl.dim()
        )));
    }
    let mut grid = grid.clone();
    for extension in 0..=cfg.max_extensions {
        let solution = shoot_on(tnl, &grid, cfg)?;
        let tail = *solution.profile.values().last().unwrap();
        if tail.abs() < cfg.vanish_tolerance * solution.beta || extension == cfg.max_extensions {
            return Ok(solution);
        }
        grid = grid.extended(2.0 * grid.r_max());
    }
    unreachable!()
}

fn shoot_on(tnl: &TruncatedNonlinearity, grid: &RadialGrid, cfg: &ShootingConfig) -> Result<SchrodingerSolution> {
    let (mut lo, mut hi) = match cfg.bracket {
        Some(b) => b,
        None => auto_bracket(tnl, grid, cfg)?,
    };
    let lo_outcome = classify(tnl, grid, lo, cfg);
    let hi_outcome = classify(tnl, grid, hi, cfg);
    if lo_outcome == hi_outcome {
        return Err(RadialError::BracketInvalid { lo, hi, outcome: lo_outcome });
    }
    let mut bisections = 0;
    let mut converged = false;
    while bisections < cfg.max_bisections {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            converged = true;
            break;
        }
        bisections += 1;
        if classify(tnl, grid, mid, cfg) == lo_outcome {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(RadialError::NoConvergence(format!(
            "bracket [{lo}, {hi}] still open after {bisections} bisections"
        )));
    }

    let horizon = grid.r_max();
    let a = shoot(tnl, grid.nodes(), lo, horizon, cfg.blowup_threshold, true);
    let b = shoot(tnl, grid.nodes(), hi, horizon, cfg.blowup_threshold, true);
    let common = a.values.len().min(b.values.len());
    let mut junction = common - 1;
    for i in 1..common {
        let gap = (a.values[i] - b.values[i]).abs();
        if gap > cfg.divergence_tolerance * a.values[i].abs() || a.values[i] <= 0.0 {
            junction = i.saturating_sub(1).max(1);
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    let nodes = grid.nodes();
    let mut values: Vec<f64> = (0..=junction).map(|i| 0.5 * (a.values[i] + b.values[i])).collect();
    let mut derivatives: Vec<f64> = (0..=junction).map(|i| 0.5 * (a.derivatives[i] + b.derivatives[i])).collect();
    let tail_start = (junction + 1 < nodes.len()).then(|| nodes[junction]);
    if let Some(r_star) = tail_start {
        let v_star = values[junction];
        if !(v_star > 0.0 && v_star <= 1e-3 * beta) {
            return Err(RadialError::NoConvergence(format!(
                "shots separate at r = {r_star} while v = {v_star} has not decayed"
            )));
        }
        let rate = tnl.mass().sqrt();
        let power = 0.5 * (tnl.dim() as f64 - 1.0);
        for &r in &nodes[junction + 1..] {
            let v = v_star * (r_star / r).powf(power) * (-rate * (r - r_star)).exp();
            values.push(v);
            derivatives.push(v * (-rate - power / r));
        }
    }
    let profile = RadialProfile::new(grid.clone(), values, derivatives)?;
    Ok(SchrodingerSolution { profile, beta, bracket: (lo, hi), bisections, tail_start })
}
