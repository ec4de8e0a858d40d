//! Berestycki–Lions nonlinearities: evaluation, sampled validation of the
//! structural hypotheses, truncation at the first zero beyond the
//! positivity witness, and the positive/negative split used by the
//! variational estimates.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{bisect_predicate, geomspace, linspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("non-finite evaluation of {what} at s = {s}")]
    NonFiniteEvaluation { what: &'static str, s: f64 },
    #[error("g touches zero near s = {s} without changing sign")]
    ScanInconclusive { s: f64 },
    #[error("decomposition requires a positive-mass nonlinearity")]
    ZeroMassUnsupported,
    #[error("invalid probe configuration: {0}")]
    InvalidProbeConfig(String),
    #[error("invalid nonlinearity: {0}")]
    InvalidDefinition(String),
}

pub type Result<T> = std::result::Result<T, NonlinearityError>;

/// Shared scalar function handle.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MassClass {
    PositiveMass,
    ZeroMass,
}

/// Anything that provides a source term `g` together with its primitive.
pub trait SourceTerm {
    fn g(&self, s: f64) -> f64;
    /// `G(s) = ∫_0^s g`.
    fn primitive(&self, s: f64) -> f64;
}

#[derive(Clone)]
enum Law {
    Polynomial { coeffs: Vec<f64>, primitive: Vec<f64> },
    Closure { g: ScalarFn, primitive: ScalarFn },
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// A nonlinearity `g` with primitive `G`, its declared mass `m`, the sign
/// witness `zeta` and the ambient dimension that fixes `2* = 2N/(N-2)`.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    law: Law,
    mass: f64,
    zeta: f64,
    dim: usize,
    class: MassClass,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("mass", &self.mass)
            .field("zeta", &self.zeta)
            .field("dim", &self.dim)
            .field("class", &self.class)
            .finish()
    }
}

impl Nonlinearity {
    /// Polynomial `g(s) = Σ c_k s^k`. The mass is read off the linear
    /// coefficient and the witness `zeta` is chosen where `G` is largest
    /// just after it first turns positive.
    pub fn polynomial(coeffs: Vec<f64>, dim: usize) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(NonlinearityError::InvalidDefinition("polynomial coefficients must be finite".into()));
        }
        let primitive: Vec<f64> =
            std::iter::once(0.0).chain(coeffs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0))).collect();
        let linear = coeffs.get(1).copied().unwrap_or(0.0);
        let mass = (-linear).max(0.0);
        let class = if mass > 0.0 { MassClass::PositiveMass } else { MassClass::ZeroMass };
        let label = format!("polynomial{coeffs:?}");
        let law = Law::Polynomial { coeffs, primitive };
        let mut nl = Self::assemble(label, law, mass, 1.0, dim, class)?;
        nl.zeta = nl.auto_zeta().unwrap_or(1.0);
        Ok(nl)
    }

    /// `g(s) = s³ − s`, mass 1, witness 2.
    pub fn cubic(dim: usize) -> Result<Self> {
        let mut nl = Self::polynomial(vec![0.0, -1.0, 0.0, 1.0], dim)?;
        nl.label = "cubic".into();
        nl.zeta = 2.0;
        Ok(nl)
    }

    /// `g(s) = s³ − s − κ s⁵`.
    pub fn cubic_quintic(kappa: f64, dim: usize) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(NonlinearityError::InvalidDefinition(format!("kappa must be nonnegative, got {kappa}")));
        }
        let mut nl = Self::polynomial(vec![0.0, -1.0, 0.0, 1.0, 0.0, -kappa], dim)?;
        nl.label = format!("cubic_quintic(kappa={kappa})");
        Ok(nl)
    }

    /// A nonlinearity given by closures for `g` and its primitive.
    pub fn from_closures(
        label: impl Into<String>,
        g: ScalarFn,
        primitive: ScalarFn,
        mass: f64,
        zeta: f64,
        dim: usize,
        class: MassClass,
    ) -> Result<Self> {
        Self::assemble(label.into(), Law::Closure { g, primitive }, mass, zeta, dim, class)
    }

    fn assemble(label: String, law: Law, mass: f64, zeta: f64, dim: usize, class: MassClass) -> Result<Self> {
        if dim < 3 {
            return Err(NonlinearityError::InvalidDefinition(format!("dimension must be at least 3, got {dim}")));
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(NonlinearityError::InvalidDefinition(format!(
                "mass must be finite and nonnegative, got {mass}"
            )));
        }
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(NonlinearityError::InvalidDefinition(format!("zeta must be positive, got {zeta}")));
        }
        let nl = Self { label, law, mass, zeta, dim, class };
        if nl.g(0.0) != 0.0 || nl.primitive(0.0) != 0.0 {
            return Err(NonlinearityError::InvalidDefinition("g(0) and G(0) must vanish".into()));
        }
        Ok(nl)
    }

    fn auto_zeta(&self) -> Option<f64> {
        let first = geomspace(1e-3, 1e3, 6001).into_iter().find(|&s| self.primitive(s) > 0.0)?;
        (0..=100)
            .map(|k| first * (1.0 + k as f64 / 100.0))
            .filter(|&s| self.primitive(s) > 0.0 && self.g(s) >= 0.0)
            .max_by(|x, y| self.primitive(*x).total_cmp(&self.primitive(*y)))
    }

    pub fn with_zeta(mut self, zeta: f64) -> Result<Self> {
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(NonlinearityError::InvalidDefinition(format!("zeta must be positive, got {zeta}")));
        }
        self.zeta = zeta;
        Ok(self)
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(NonlinearityError::InvalidDefinition(format!(
                "mass must be finite and nonnegative, got {mass}"
            )));
        }
        self.mass = mass;
        Ok(self)
    }

    /// Override the claimed mass class; validation reports a mismatch.
    pub fn with_class(mut self, class: MassClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(NonlinearityError::InvalidDefinition(format!("dimension must be at least 3, got {dim}")));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn class(&self) -> MassClass {
        self.class
    }

    /// `2* = 2N/(N−2)`.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dim)
    }
}

pub fn critical_exponent(dim: usize) -> f64 {
    2.0 * dim as f64 / (dim as f64 - 2.0)
}

impl SourceTerm for Nonlinearity {
    fn g(&self, s: f64) -> f64 {
        match &self.law {
            Law::Polynomial { coeffs, .. } => horner(coeffs, s),
            Law::Closure { g, .. } => g(s),
        }
    }

    fn primitive(&self, s: f64) -> f64 {
        match &self.law {
            Law::Polynomial { primitive, .. } => horner(primitive, s),
            Law::Closure { primitive, .. } => primitive(s),
        }
    }
}

/// Sampling configuration for validation, truncation and the growth
/// inequality.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeConfig {
    pub s_grid: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    /// Relative tolerance for pointwise identities and inequalities.
    pub tolerance: f64,
    /// Tolerance for sampled limits.
    pub limit_tolerance: f64,
    /// Geometric window approaching `0⁺`, ascending.
    pub near_zero: Vec<f64>,
    /// Geometric window approaching `+∞`, ascending.
    pub at_infinity: Vec<f64>,
    /// Zero search for truncation runs over `[zeta, scan_bound_factor·zeta]`.
    pub scan_bound_factor: f64,
    pub scan_points: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            s_grid: linspace(-5.0, 5.0, 10_001),
            epsilon_list: vec![0.1, 0.5, 0.9],
            tolerance: 1e-9,
            limit_tolerance: 1e-3,
            near_zero: geomspace(1e-6, 1e-1, 11),
            at_infinity: geomspace(1e1, 1e6, 11),
            scan_bound_factor: 1e3,
            scan_points: 20_000,
        }
    }
}

impl ProbeConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(NonlinearityError::InvalidProbeConfig(msg.into()));
        if self.s_grid.is_empty() {
            return bad("probe grid is empty");
        }
        if self.s_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("probe grid must be strictly increasing");
        }
        if !(self.s_grid[0] < 0.0 && *self.s_grid.last().unwrap() > 0.0) {
            return bad("probe grid must cover a negative segment and [0, max]");
        }
        if self.epsilon_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("epsilon values must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0 && self.limit_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        for window in [&self.near_zero, &self.at_infinity] {
            if window.len() < 2 || window.iter().any(|&s| !(s > 0.0)) {
                return bad("limit windows need at least two positive points");
            }
        }
        if !(self.scan_bound_factor > 1.0) || self.scan_points < 2 {
            return bad("zero scan needs a bound factor > 1 and at least two points");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// `(s, sampled quantity)` pairs behind the verdict.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub label: String,
    #[serde(rename = "N")]
    pub dim: usize,
    pub critical_exponent: f64,
    pub claimed_class: MassClass,
    pub declared_mass: f64,
    pub detected_mass: f64,
    pub class_mismatch: bool,
    pub g1: HypothesisCheck,
    pub g2: HypothesisCheck,
    pub g3: HypothesisCheck,
    pub g4: HypothesisCheck,
    pub primitive: HypothesisCheck,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        [&self.g1, &self.g2, &self.g3, &self.g4, &self.primitive].iter().all(|h| h.passed)
    }
}

fn finite(what: &'static str, s: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NonlinearityError::NonFiniteEvaluation { what, s })
    }
}

/// Sampled check of the Berestycki–Lions hypotheses (g1)–(g4), and of
/// (g2)′ for a claimed zero-mass nonlinearity. A pass is evidence on the
/// probe windows, not a proof.
pub fn validate_bl(nl: &Nonlinearity, cfg: &ProbeConfig) -> Result<ValidationReport> {
    cfg.check()?;
    let p_minus_1 = nl.critical_exponent() - 1.0;

    // (g1)
    let g0 = finite("g", 0.0, nl.g(0.0))?;
    let mut worst_jump = 0.0f64;
    let mut worst_at = 0.0;
    for &s in &cfg.s_grid {
        let gs = finite("g", s, nl.g(s))?;
        let delta = 1e-8 * (1.0 + s.abs());
        let gd = finite("g", s + delta, nl.g(s + delta))?;
        let jump = (gd - gs).abs() / (1.0 + gs.abs());
        if jump > worst_jump {
            worst_jump = jump;
            worst_at = s;
        }
    }
    let g1 = HypothesisCheck {
        name: "g1".into(),
        passed: g0 == 0.0 && worst_jump <= 1e-4,
        detail: format!("g(0) = {g0:e}; largest relative jump over a 1e-8 step is {worst_jump:e} at s = {worst_at}"),
        samples: vec![[0.0, g0], [worst_at, worst_jump]],
    };

    // (g2) / (g2)'
    let mut ratio_samples = Vec::with_capacity(cfg.near_zero.len());
    for &s in &cfg.near_zero {
        ratio_samples.push([s, finite("g", s, nl.g(s))? / s]);
    }
    let limit = ratio_samples[0][1];
    let detected_mass = (-limit).max(0.0);
    let mass_present = detected_mass > cfg.limit_tolerance;
    let (g2, class_mismatch) = match nl.class() {
        MassClass::PositiveMass => {
            let matches = limit < 0.0 && (limit + nl.mass()).abs() <= cfg.limit_tolerance * nl.mass().max(1.0);
            let mismatch = !mass_present;
            (
                HypothesisCheck {
                    name: "g2".into(),
                    passed: matches && !mismatch && nl.mass() > 0.0,
                    detail: format!(
                        "g(s)/s at s = {:e} is {limit:e}; declared -m = {:e}",
                        ratio_samples[0][0],
                        -nl.mass()
                    ),
                    samples: ratio_samples,
                },
                mismatch,
            )
        }
        MassClass::ZeroMass => {
            let liminf_finite = ratio_samples.iter().all(|r| r[1].is_finite());
            let mut crit_samples = Vec::with_capacity(cfg.near_zero.len());
            for &s in &cfg.near_zero {
                crit_samples.push([s, finite("g", s, nl.g(s))? / s.powf(p_minus_1)]);
            }
            let limsup_ok = crit_samples[0][1] <= cfg.limit_tolerance;
            let mismatch = mass_present;
            let mut samples = ratio_samples;
            samples.extend(crit_samples.iter().copied());
            (
                HypothesisCheck {
                    name: "g2'".into(),
                    passed: liminf_finite && limsup_ok && !mismatch,
                    detail: format!(
                        "liminf probe g(s)/s -> {limit:e} (finite: {liminf_finite}); \
                         g(s)/s^(2*-1) at s = {:e} is {:e}; detected mass {detected_mass:e}{}",
                        crit_samples[0][0],
                        crit_samples[0][1],
                        if mismatch { " contradicts the zero-mass claim" } else { "" }
                    ),
                    samples,
                },
                mismatch,
            )
        }
    };

    // (g3)
    let mut tail = Vec::with_capacity(cfg.at_infinity.len());
    for &s in &cfg.at_infinity {
        tail.push([s, finite("g", s, nl.g(s))? / s.powf(p_minus_1)]);
    }
    let far = *tail.last().unwrap();
    let g3 = HypothesisCheck {
        name: "g3".into(),
        passed: far[1] <= cfg.limit_tolerance,
        detail: format!("g(s)/s^(2*-1) at s = {:e} is {:e}", far[0], far[1]),
        samples: tail,
    };

    // (g4)
    let gz = finite("G", nl.zeta(), nl.primitive(nl.zeta()))?;
    let g4 = HypothesisCheck {
        name: "g4".into(),
        passed: gz > 0.0,
        detail: format!("G(zeta = {}) = {gz:e}", nl.zeta()),
        samples: vec![[nl.zeta(), gz]],
    };

    // G' = g on the probe grid
    let mut worst = 0.0f64;
    let mut worst_s = 0.0;
    for &s in &cfg.s_grid {
        let h = 1e-5 * (1.0 + s.abs());
        let up = finite("G", s + h, nl.primitive(s + h))?;
        let down = finite("G", s - h, nl.primitive(s - h))?;
        let err = ((up - down) / (2.0 * h) - nl.g(s)).abs() / (1.0 + nl.g(s).abs());
        if err > worst {
            worst = err;
            worst_s = s;
        }
    }
    let primitive = HypothesisCheck {
        name: "primitive".into(),
        passed: worst <= 1e-5,
        detail: format!("largest relative |G' - g| is {worst:e} at s = {worst_s}"),
        samples: vec![[worst_s, worst]],
    };

    Ok(ValidationReport {
        label: nl.label().to_string(),
        dim: nl.dim(),
        critical_exponent: nl.critical_exponent(),
        claimed_class: nl.class(),
        declared_mass: nl.mass(),
        detected_mass,
        class_mismatch,
        g1,
        g2,
        g3,
        g4,
        primitive,
    })
}

/// `g` cut off at its first zero `s0 ≥ zeta` and set to zero on `s < 0`.
#[derive(Debug, Clone)]
pub struct TruncatedNonlinearity {
    base: Nonlinearity,
    s0: f64,
}

impl TruncatedNonlinearity {
    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }

    /// First zero of `g` at or beyond `zeta`, `+∞` if none was found.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn mass(&self) -> f64 {
        self.base.mass()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Truncate again, scanning `g̃` itself.
    pub fn retruncate(&self, cfg: &ProbeConfig) -> Result<TruncatedNonlinearity> {
        cfg.check()?;
        let s0 = first_zero_beyond(|s| self.g(s), self.base.zeta(), cfg)?.unwrap_or(f64::INFINITY);
        Ok(TruncatedNonlinearity { base: self.base.clone(), s0 })
    }
}

impl SourceTerm for TruncatedNonlinearity {
    fn g(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.s0 {
            0.0
        } else {
            self.base.g(s)
        }
    }

    fn primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.base.primitive(s.min(self.s0))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TruncationSummary {
    pub label: String,
    pub zeta: f64,
    /// `None` stands for `s0 = +∞`.
    pub s0: Option<f64>,
    pub mass: f64,
}

impl From<&TruncatedNonlinearity> for TruncationSummary {
    fn from(t: &TruncatedNonlinearity) -> Self {
        Self {
            label: t.base.label().to_string(),
            zeta: t.base.zeta(),
            s0: t.s0.is_finite().then_some(t.s0),
            mass: t.mass(),
        }
    }
}

fn first_zero_beyond<F>(g: F, zeta: f64, cfg: &ProbeConfig) -> Result<Option<f64>>
where
    F: Fn(f64) -> f64,
{
    let points = geomspace(zeta, zeta * cfg.scan_bound_factor, cfg.scan_points);
    let mut values = Vec::with_capacity(points.len());
    for &s in &points {
        values.push(finite("g", s, g(s))?);
    }
    if values[0] == 0.0 {
        return Ok(Some(points[0]));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for k in 1..points.len() {
        let (prev, cur) = (values[k - 1], values[k]);
        if cur == 0.0 || cur.signum() != prev.signum() {
            let sign = prev.signum();
            let (_, hi) = bisect_predicate(points[k - 1], points[k], 200, |s| {
                let v = g(s);
                v == 0.0 || v.signum() != sign
            });
            // first float where g vanishes or has flipped sign
            return Ok(Some(hi));
        }
        if k + 1 < points.len() {
            let next = values[k + 1];
            let local_min = cur.abs() < prev.abs() && cur.abs() <= next.abs();
            if local_min && next.signum() == cur.signum() && cur.abs() <= cfg.tolerance * scale {
                return Err(NonlinearityError::ScanInconclusive { s: points[k] });
            }
        }
    }
    Ok(None)
}

/// Locate `s0` and return the truncated nonlinearity.
pub fn truncate(nl: &Nonlinearity, cfg: &ProbeConfig) -> Result<TruncatedNonlinearity> {
    cfg.check()?;
    let s0 = first_zero_beyond(|s| nl.g(s), nl.zeta(), cfg)?.unwrap_or(f64::INFINITY);
    Ok(TruncatedNonlinearity { base: nl.clone(), s0 })
}

/// `g̃ = g1 − g2` with `g1 = (g̃ + m s)⁺` on `s ≥ 0`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    tnl: TruncatedNonlinearity,
    mass: f64,
    /// Sign changes of `g̃(s) + m s` on `s > 0`, ascending, starting at 0.
    breaks: Vec<f64>,
    /// Whether `g̃ + m s` is positive on `[breaks[j], breaks[j+1])`.
    positive: Vec<bool>,
    /// `G1(breaks[j])`.
    cumulative: Vec<f64>,
}

/// Split a truncated positive-mass nonlinearity into `g1 − g2`.
pub fn decompose(tnl: &TruncatedNonlinearity) -> Result<Decomposition> {
    if tnl.base().class() != MassClass::PositiveMass || !(tnl.mass() > 0.0) {
        return Err(NonlinearityError::ZeroMassUnsupported);
    }
    let m = tnl.mass();
    let zeta = tnl.base().zeta();
    let h = |s: f64| tnl.g(s) + m * s;

    let near_end = if tnl.s0().is_finite() { tnl.s0() } else { 10.0 * zeta };
    let far_end = if tnl.s0().is_finite() { 2.0 * tnl.s0() } else { 1e3 * zeta };
    let mut points = linspace(0.0, near_end, 20_001);
    if far_end > near_end {
        points.extend(geomspace(near_end, far_end, 2_001).into_iter().skip(1));
    }

    let mut breaks = vec![0.0];
    let mut positive = Vec::new();
    let mut sign = 0.0;
    for k in 1..points.len() {
        let v = h(points[k]);
        if !v.is_finite() {
            return Err(NonlinearityError::NonFiniteEvaluation { what: "g", s: points[k] });
        }
        if v == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = v.signum();
            positive.push(v > 0.0);
            continue;
        }
        if v.signum() != sign {
            let from = sign;
            let (lo, hi) = bisect_predicate(points[k - 1], points[k], 200, |s| {
                let y = h(s);
                y != 0.0 && y.signum() != from
            });
            breaks.push(0.5 * (lo + hi));
            positive.push(v > 0.0);
            sign = v.signum();
        }
    }
    if positive.is_empty() {
        positive.push(false);
    }

    let big_h = |s: f64| tnl.primitive(s) + 0.5 * m * s * s;
    let mut cumulative = vec![0.0];
    for j in 1..breaks.len() {
        let gain = if positive[j - 1] { (big_h(breaks[j]) - big_h(breaks[j - 1])).max(0.0) } else { 0.0 };
        cumulative.push(cumulative[j - 1] + gain);
    }

    Ok(Decomposition { tnl: tnl.clone(), mass: m, breaks, positive, cumulative })
}

impl Decomposition {
    pub fn truncated(&self) -> &TruncatedNonlinearity {
        &self.tnl
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn g1(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            (self.tnl.g(s) + self.mass * s).max(0.0)
        }
    }

    pub fn g2(&self, s: f64) -> f64 {
        self.g1(s) - self.tnl.g(s)
    }

    pub fn big_g1(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let j = self.breaks.partition_point(|&b| b <= s) - 1;
        if !self.positive[j] {
            return self.cumulative[j];
        }
        let big_h = |x: f64| self.tnl.primitive(x) + 0.5 * self.mass * x * x;
        self.cumulative[j] + (big_h(s) - big_h(self.breaks[j])).max(0.0)
    }

    pub fn big_g2(&self, s: f64) -> f64 {
        self.big_g1(s) - self.tnl.primitive(s)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CEpsRow {
    pub epsilon: f64,
    /// Empirical `C_ε` for `g1 ≤ C_ε s^{2*-1} + ε g2`.
    pub c_eps: f64,
    pub argmax: f64,
    pub holds: bool,
    /// Empirical constant for `G1 ≤ (C/2*) |s|^{2*} + ε G2`.
    pub primitive_constant: f64,
    /// Whether the primitive inequality holds on the probes with `c_eps`.
    pub primitive_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CEpsTable {
    pub critical_exponent: f64,
    pub rows: Vec<CEpsRow>,
}

/// Empirical constants of the subcritical growth inequalities on the
/// probe grid.
pub fn check_growth_inequality(dec: &Decomposition, cfg: &ProbeConfig) -> Result<CEpsTable> {
    cfg.check()?;
    let crit = dec.truncated().base().critical_exponent();
    let p = crit - 1.0;
    let mut rows = Vec::with_capacity(cfg.epsilon_list.len());
    for &eps in &cfg.epsilon_list {
        let mut c_eps = 0.0f64;
        let mut argmax = 0.0;
        let mut c_prim = 0.0f64;
        for &s in cfg.s_grid.iter().filter(|&&s| s > 0.0) {
            let (g1, g2) = (dec.g1(s), dec.g2(s));
            let (big1, big2) = (dec.big_g1(s), dec.big_g2(s));
            for (what, v) in [("g1", g1), ("g2", g2), ("G1", big1), ("G2", big2)] {
                finite(what, s, v)?;
            }
            let ratio = (g1 - eps * g2) / s.powf(p);
            if ratio > c_eps {
                c_eps = ratio;
                argmax = s;
            }
            c_prim = c_prim.max(crit * (big1 - eps * big2) / s.powf(crit));
        }
        let mut holds = true;
        let mut primitive_holds = true;
        for &s in &cfg.s_grid {
            if s >= 0.0 {
                let (g1, g2) = (dec.g1(s), dec.g2(s));
                let rhs = c_eps * s.powf(p) + eps * g2;
                holds &= g1 <= rhs + cfg.tolerance * (1.0 + g1.abs() + rhs.abs());
            }
            let (big1, big2) = (dec.big_g1(s), dec.big_g2(s));
            let rhs = c_eps / crit * s.abs().powf(crit) + eps * big2;
            primitive_holds &= big1 <= rhs + cfg.tolerance * (1.0 + big1.abs() + rhs.abs());
        }
        rows.push(CEpsRow { epsilon: eps, c_eps, argmax, holds, primitive_constant: c_prim, primitive_holds });
    }
    Ok(CEpsTable { critical_exponent: crit, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bistable() -> Nonlinearity {
        Nonlinearity::polynomial(vec![0.0, -0.3, 1.3, -1.0], 3).unwrap().with_zeta(1.0).unwrap()
    }

    #[test]
    fn cubic_passes_all_hypotheses_in_three_dimensions() {
        let nl = Nonlinearity::cubic(3).unwrap();
        let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
        assert!(report.all_passed(), "{report:#?}");
        assert_eq!(report.g4.samples[0][1], 2.0);
        assert!((report.detected_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_is_not_subcritical_beyond_three_dimensions() {
        for dim in [4, 5] {
            let nl = Nonlinearity::cubic(dim).unwrap();
            let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
            assert!(!report.g3.passed, "N = {dim}");
            assert!(report.g1.passed && report.g2.passed && report.g4.passed);
        }
    }

    #[test]
    fn cubic_quintic_passes_in_four_and_five_dimensions() {
        for dim in [3, 4, 5] {
            let nl = Nonlinearity::cubic_quintic(0.1, dim).unwrap();
            let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
            assert!(report.all_passed(), "N = {dim}: {report:#?}");
        }
    }

    #[test]
    fn positive_linear_term_fails_mass_condition() {
        let nl = Nonlinearity::polynomial(vec![0.0, 1.0], 3)
            .unwrap()
            .with_class(MassClass::PositiveMass)
            .with_mass(1.0)
            .unwrap();
        let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
        assert!(!report.g2.passed);
        assert!((report.g2.samples[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_claim_on_cubic_is_flagged() {
        let nl = Nonlinearity::cubic(3).unwrap().with_class(MassClass::ZeroMass);
        let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
        assert!(report.class_mismatch);
        assert!(!report.g2.passed);
        assert!((report.detected_mass - 1.0).abs() < 1e-9);
        // both (g2)' probes individually pass: g/s stays finite and g/s^5 is very negative
        let crit_probe = report.g2.samples[11][1];
        assert!(crit_probe < -1e23);
    }

    #[test]
    fn genuine_zero_mass_nonlinearity_is_classified() {
        // g(s) = -s^3: no linear term, so the class is read as zero mass
        let nl = Nonlinearity::polynomial(vec![0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0], 3).unwrap();
        let report = validate_bl(&nl, &ProbeConfig::default()).unwrap();
        assert!(!report.class_mismatch);
        assert!(report.g2.passed, "{:?}", report.g2);
        assert!(!report.g4.passed);
    }

    #[test]
    fn non_finite_g_is_an_error() {
        let g: ScalarFn = Arc::new(|s: f64| if s > 4.0 { f64::NAN } else { s * s * s - s });
        let big_g: ScalarFn = Arc::new(|s: f64| s.powi(4) / 4.0 - s * s / 2.0);
        let nl = Nonlinearity::from_closures("nan", g, big_g, 1.0, 2.0, 3, MassClass::PositiveMass).unwrap();
        let err = validate_bl(&nl, &ProbeConfig::default()).unwrap_err();
        assert!(matches!(err, NonlinearityError::NonFiniteEvaluation { .. }));
    }

    #[test]
    fn cubic_has_no_truncation_point() {
        let nl = Nonlinearity::cubic(3).unwrap().with_zeta(2f64.sqrt()).unwrap();
        let t = truncate(&nl, &ProbeConfig::default()).unwrap();
        assert!(t.s0().is_infinite());
        assert_eq!(t.g(3.0), nl.g(3.0));
        assert_eq!(t.g(-1.0), 0.0);
    }

    #[test]
    fn bistable_truncates_at_one() {
        let t = truncate(&bistable(), &ProbeConfig::default()).unwrap();
        assert!((t.s0() - 1.0).abs() < 1e-12, "s0 = {}", t.s0());
        assert_eq!(t.g(1.5), 0.0);
        assert_eq!(t.g(0.5), bistable().g(0.5));
        assert_eq!(t.g(-1.0), 0.0);
        // bisection oracle on [1, 10] for -s^3 + 1.3 s^2 - 0.3 s
        let oracle = crate::numeric::bisect_root(0.95, 10.0, 200, |s| -s * s * s + 1.3 * s * s - 0.3 * s);
        assert!((t.s0() - oracle).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_idempotent() {
        let cfg = ProbeConfig::default();
        for nl in [bistable(), Nonlinearity::cubic_quintic(0.1, 3).unwrap()] {
            let t = truncate(&nl, &cfg).unwrap();
            let again = t.retruncate(&cfg).unwrap();
            assert!((again.s0() - t.s0()).abs() <= 1e-14 * t.s0(), "{} vs {}", again.s0(), t.s0());
        }
        let cubic = truncate(&Nonlinearity::cubic(3).unwrap(), &cfg).unwrap();
        assert!(cubic.retruncate(&cfg).unwrap().s0().is_infinite());
    }

    #[test]
    fn tangential_zero_is_inconclusive() {
        let g: ScalarFn = Arc::new(|s: f64| s * (s - 2.0) * (s - 2.0) - if s < 1.0 { 2.0 * s } else { 0.0 });
        let big_g: ScalarFn = Arc::new(|_| 0.0);
        let nl = Nonlinearity::from_closures("touch", g, big_g, 1.0, 1.0, 3, MassClass::PositiveMass);
        // G(0) = 0 and g(0) = 0 hold, so construction succeeds
        let nl = nl.unwrap();
        let err = truncate(&nl, &ProbeConfig::default()).unwrap_err();
        match err {
            NonlinearityError::ScanInconclusive { s } => assert!((s - 2.0).abs() < 1e-2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cubic_decomposition_closed_forms() {
        let t = truncate(&Nonlinearity::cubic(3).unwrap(), &ProbeConfig::default()).unwrap();
        let d = decompose(&t).unwrap();
        for s in [0.0, 0.1, 0.7, 1.0, 2.5, 5.0] {
            assert!((d.g1(s) - s * s * s).abs() <= 1e-13 * (1.0 + s * s * s));
            assert!((d.g2(s) - s).abs() <= 1e-13 * (1.0 + s * s * s));
            assert!((d.big_g2(s) - 0.5 * s * s).abs() <= 1e-12 * (1.0 + s.powi(4)));
        }
        assert_eq!(d.g1(-2.0), 0.0);
    }

    #[test]
    fn bistable_split_value() {
        let t = truncate(&bistable(), &ProbeConfig::default()).unwrap();
        let d = decompose(&t).unwrap();
        assert!((d.g1(0.5) - 0.2).abs() < 1e-15);
        assert!((t.g(0.5) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_cannot_be_decomposed() {
        let nl = Nonlinearity::cubic(3).unwrap().with_class(MassClass::ZeroMass);
        let t = truncate(&nl, &ProbeConfig::default()).unwrap();
        assert_eq!(decompose(&t).unwrap_err(), NonlinearityError::ZeroMassUnsupported);
    }

    #[test]
    fn c_eps_for_cubic_matches_stationary_point() {
        // (s^3 - eps s)/s^5 is maximal at s^2 = 2 eps with value 1/(4 eps)
        let t = truncate(&Nonlinearity::cubic(3).unwrap(), &ProbeConfig::default()).unwrap();
        let d = decompose(&t).unwrap();
        let table = check_growth_inequality(&d, &ProbeConfig::default()).unwrap();
        for row in &table.rows {
            let brute = crate::numeric::linspace(1e-3, 5.0, 200_001)
                .into_iter()
                .map(|s| (s * s * s - row.epsilon * s) / s.powi(5))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((brute - 0.25 / row.epsilon).abs() < 1e-6);
            assert!((row.c_eps - brute).abs() < 1e-6 * brute, "{row:?}");
            assert!(row.holds && row.primitive_holds);
        }
        let cs: Vec<f64> = table.rows.iter().map(|r| r.c_eps).collect();
        assert!(cs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decomposition_integrals_match_quadrature() {
        let t = truncate(&Nonlinearity::cubic_quintic(0.1, 3).unwrap(), &ProbeConfig::default()).unwrap();
        let d = decompose(&t).unwrap();
        for s in [0.5, 2.0, 3.5, 5.0] {
            let n = 20_000;
            let h = s / n as f64;
            let quad: f64 = (0..n)
                .map(|k| {
                    let (a, b) = (k as f64 * h, (k as f64 + 1.0) * h);
                    h / 6.0 * (d.g1(a) + 4.0 * d.g1(0.5 * (a + b)) + d.g1(b))
                })
                .sum();
            assert!((quad - d.big_g1(s)).abs() < 1e-6, "s = {s}: {quad} vs {}", d.big_g1(s));
        }
    }
}
