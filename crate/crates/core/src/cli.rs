//! Batch front-end. Every run resolves a flat configuration (defaults,
//! then preset, then config file, then flags), executes one pipeline and
//! writes `report.json`, `config.txt` and profile CSVs to the output
//! directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::nonlinearity::{
    check_growth_inequality, decompose, truncate, validate_bl, MassClass, Nonlinearity, NonlinearityError, ProbeConfig,
    SourceTerm, TruncatedNonlinearity, TruncationSummary,
};
use crate::pohozaev::{
    evaluate, ground_state_from_schrodinger, nondegeneracy_check, KirchhoffParams, PohozaevError, SearchConfig,
};
use crate::radial::{
    gradient_integral, radial_integral, read_csv, solve_schrodinger_ground_state, write_csv, IntegrandMode,
    RadialError, RadialGrid, RadialProfile, SchrodingerSolution, ShootingConfig,
};
use crate::rescaling::{
    check_relaxed_condition, construct_kirchhoff_solution, find_tbar, thresholds, InnerFunction, KirchhoffModel,
    RescalingError, ScanConfig,
};
use crate::verify::{inverse_rescaling_check, kirchhoff_residual, schrodinger_residual, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "kirchhoff", version, about = "Radial Kirchhoff solutions by rescaling Schrödinger ground states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    SolveSchrodinger,
    SolveKirchhoff,
    Thresholds,
    GroundState,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::SolveSchrodinger => "solve-schrodinger",
            Self::SolveKirchhoff => "solve-kirchhoff",
            Self::Thresholds => "thresholds",
            Self::GroundState => "ground-state",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the Berestycki–Lions hypotheses, truncation and decomposition
    Validate(RunArgs),
    /// Radial ground state of −Δv = g(v) by shooting
    SolveSchrodinger(RunArgs),
    /// Kirchhoff solutions u = v(t̄ ·) with certificates
    SolveKirchhoff(RunArgs),
    /// Smallness thresholds δ₁, δ₂ for M = a + b f
    Thresholds(RunArgs),
    /// Least-action rescaled solution (N = 3, 4)
    GroundState(RunArgs),
    /// Re-certify a stored profile CSV
    Verify(RunArgs),
}

impl Command {
    fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Self::Validate(a) => (CommandKind::Validate, a),
            Self::SolveSchrodinger(a) => (CommandKind::SolveSchrodinger, a),
            Self::SolveKirchhoff(a) => (CommandKind::SolveKirchhoff, a),
            Self::Thresholds(a) => (CommandKind::Thresholds, a),
            Self::GroundState(a) => (CommandKind::GroundState, a),
            Self::Verify(a) => (CommandKind::Verify, a),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// cubic3d, cubic_quintic4d or bistable3d
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value = "kirchhoff-output")]
    pub output_dir: PathBuf,
    /// Accepted for compatibility; every algorithm is deterministic
    #[arg(long)]
    pub seedless: bool,

    /// cubic, cubic_quintic or polynomial
    #[arg(long)]
    pub nonlinearity: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Polynomial coefficients c0,c1,... of g(s) = Σ c_k s^k
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long = "N")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Inner function of M = a + b f: id, square, sqrt or log1p
    #[arg(long)]
    pub f: Option<String>,
    /// affine (a + b f), exp or inv1p
    #[arg(long)]
    pub model: Option<String>,
    /// Gradient integral for `thresholds`; computed from the ground state if absent
    #[arg(long = "D")]
    pub d: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub grading: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta_lo: Option<f64>,
    #[arg(long)]
    pub beta_hi: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub brackets: Option<usize>,
    /// Tolerance of the rescaling and Pohozaev certificates
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Bound on the relative discrete PDE residual
    #[arg(long)]
    pub residual_tolerance: Option<f64>,
    /// Profile CSV for `verify`
    #[arg(long)]
    pub profile: Option<String>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub nonlinearity: String,
    pub kappa: f64,
    pub coeffs: Vec<f64>,
    pub zeta: Option<f64>,
    #[serde(rename = "N")]
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub f: String,
    pub model: String,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub r_max: f64,
    pub intervals: usize,
    pub grading: f64,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub brackets: usize,
    pub tolerance: f64,
    pub residual_tolerance: f64,
    pub profile: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nonlinearity: "cubic".into(),
            kappa: 0.1,
            coeffs: Vec::new(),
            zeta: None,
            dim: 3,
            a: 1.0,
            b: 1.0,
            f: "id".into(),
            model: "affine".into(),
            d: None,
            r_max: 20.0,
            intervals: 2000,
            grading: 2.0,
            beta_lo: None,
            beta_hi: None,
            t_min: 1e-4,
            t_max: 1e4,
            brackets: 400,
            tolerance: 1e-3,
            residual_tolerance: 1e-2,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID_CONFIG, message: message.into() }
    }
    fn solver(message: impl Into<String>) -> Self {
        Self { code: EXIT_NO_CONVERGENCE, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<NonlinearityError> for CliError {
    fn from(e: NonlinearityError) -> Self {
        match e {
            NonlinearityError::NonFiniteEvaluation { .. } | NonlinearityError::ScanInconclusive { .. } => {
                Self::solver(e.to_string())
            }
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::BracketInvalid { .. } | RadialError::NoConvergence(_) | RadialError::NonFiniteIntegral => {
                Self::solver(e.to_string())
            }
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<RescalingError> for CliError {
    fn from(e: RescalingError) -> Self {
        match e {
            RescalingError::Radial(r) => r.into(),
            RescalingError::CertificateFailed { .. } => Self { code: EXIT_CERTIFICATE, message: e.to_string() },
            RescalingError::InvalidModel(_) | RescalingError::InvalidInput(_) => Self::config(e.to_string()),
            _ => Self::solver(e.to_string()),
        }
    }
}

impl From<PohozaevError> for CliError {
    fn from(e: PohozaevError) -> Self {
        match e {
            PohozaevError::Radial(r) => r.into(),
            PohozaevError::Rescaling(r) => r.into(),
            PohozaevError::InvalidParams(_) | PohozaevError::UnsupportedDimension(_) => Self::config(e.to_string()),
            PohozaevError::ProjectionMismatch { .. } => Self { code: EXIT_CERTIFICATE, message: e.to_string() },
            _ => Self::solver(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Radial(r) => r.into(),
            _ => Self::config(e.to_string()),
        }
    }
}

fn preset(name: &str) -> Result<Vec<(&'static str, &'static str)>, CliError> {
    Ok(match name {
        "cubic3d" => vec![("nonlinearity", "cubic"), ("N", "3")],
        "cubic_quintic4d" => vec![("nonlinearity", "cubic_quintic"), ("kappa", "0.1"), ("N", "4")],
        "bistable3d" => vec![("nonlinearity", "polynomial"), ("coeffs", "0,-0.3,1.3,-1"), ("zeta", "1"), ("N", "3")],
        _ => return Err(CliError::config(format!("unknown preset `{name}`"))),
    })
}

/// Parse a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", lineno + 1)))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_opt_num(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn parse_coeffs(value: &str) -> Result<Vec<f64>, CliError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|c| parse_num("coeffs", c.trim())).collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:?}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "nonlinearity" => self.nonlinearity = value.to_string(),
            "kappa" => self.kappa = parse_num(key, value)?,
            "coeffs" => self.coeffs = parse_coeffs(value)?,
            "zeta" => self.zeta = parse_opt_num(key, value)?,
            "N" => self.dim = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "b" => self.b = parse_num(key, value)?,
            "f" => self.f = value.to_string(),
            "model" => self.model = value.to_string(),
            "D" => self.d = parse_opt_num(key, value)?,
            "r_max" => self.r_max = parse_num(key, value)?,
            "intervals" => self.intervals = parse_num(key, value)?,
            "grading" => self.grading = parse_num(key, value)?,
            "beta_lo" => self.beta_lo = parse_opt_num(key, value)?,
            "beta_hi" => self.beta_hi = parse_opt_num(key, value)?,
            "t_min" => self.t_min = parse_num(key, value)?,
            "t_max" => self.t_max = parse_num(key, value)?,
            "brackets" => self.brackets = parse_num(key, value)?,
            "tolerance" => self.tolerance = parse_num(key, value)?,
            "residual_tolerance" => self.residual_tolerance = parse_num(key, value)?,
            "profile" => self.profile = (!value.is_empty() && value != "none").then(|| value.to_string()),
            _ => return Err(CliError::config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// `key = value` lines that [`RunConfig::resolve`] reads back to `self`.
    pub fn to_config_text(&self) -> String {
        let coeffs: Vec<String> = self.coeffs.iter().map(|c| format!("{c:?}")).collect();
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        line("nonlinearity", self.nonlinearity.clone());
        line("kappa", format!("{:?}", self.kappa));
        line("coeffs", coeffs.join(","));
        line("zeta", fmt_opt(self.zeta));
        line("N", self.dim.to_string());
        line("a", format!("{:?}", self.a));
        line("b", format!("{:?}", self.b));
        line("f", self.f.clone());
        line("model", self.model.clone());
        line("D", fmt_opt(self.d));
        line("r_max", format!("{:?}", self.r_max));
        line("intervals", self.intervals.to_string());
        line("grading", format!("{:?}", self.grading));
        line("beta_lo", fmt_opt(self.beta_lo));
        line("beta_hi", fmt_opt(self.beta_hi));
        line("t_min", format!("{:?}", self.t_min));
        line("t_max", format!("{:?}", self.t_max));
        line("brackets", self.brackets.to_string());
        line("tolerance", format!("{:?}", self.tolerance));
        line("residual_tolerance", format!("{:?}", self.residual_tolerance));
        line("profile", self.profile.clone().unwrap_or_else(|| "none".into()));
        out
    }

    /// Defaults, then preset, then config file, then flags.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let file_pairs = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => Vec::new(),
        };
        let file_preset = file_pairs.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.clone());
        if let Some(name) = args.preset.clone().or(file_preset) {
            for (k, v) in preset(&name)? {
                cfg.set(k, v)?;
            }
        }
        for (k, v) in &file_pairs {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = &args.$field {
                    cfg.$field = v.clone();
                }
            };
            ($field:ident, opt) => {
                if let Some(v) = args.$field {
                    cfg.$field = Some(v);
                }
            };
        }
        flag!(nonlinearity);
        flag!(kappa);
        flag!(zeta, opt);
        flag!(dim);
        flag!(a);
        flag!(b);
        flag!(f);
        flag!(model);
        flag!(d, opt);
        flag!(r_max);
        flag!(intervals);
        flag!(grading);
        flag!(beta_lo, opt);
        flag!(beta_hi, opt);
        flag!(t_min);
        flag!(t_max);
        flag!(brackets);
        flag!(tolerance);
        flag!(residual_tolerance);
        if let Some(c) = &args.coeffs {
            cfg.coeffs = parse_coeffs(c)?;
        }
        if let Some(p) = &args.profile {
            cfg.profile = Some(p.clone());
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let positive = [
            ("a", self.a),
            ("r_max", self.r_max),
            ("grading", self.grading),
            ("t_min", self.t_min),
            ("tolerance", self.tolerance),
            ("residual_tolerance", self.residual_tolerance),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::config(format!("`{k}` must be positive and finite, got {v}")));
            }
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(CliError::config(format!("`b` must be non-negative, got {}", self.b)));
        }
        if self.dim < 3 {
            return Err(CliError::config(format!("`N` must be at least 3, got {}", self.dim)));
        }
        if !(self.t_max.is_finite() && self.t_max > self.t_min) {
            return Err(CliError::config("`t_max` must exceed `t_min`"));
        }
        if self.brackets == 0 {
            return Err(CliError::config("`brackets` must be positive"));
        }
        if self.beta_lo.is_some() != self.beta_hi.is_some() {
            return Err(CliError::config("`beta_lo` and `beta_hi` must be given together"));
        }
        if let Some(d) = self.d {
            if !(d.is_finite() && d > 0.0) {
                return Err(CliError::config(format!("`D` must be positive, got {d}")));
            }
        }
        if InnerFunction::from_name(&self.f).is_none() {
            return Err(CliError::config(format!("unknown inner function `{}`", self.f)));
        }
        if !matches!(self.model.as_str(), "affine" | "exp" | "inv1p") {
            return Err(CliError::config(format!("unknown model `{}`", self.model)));
        }
        if !matches!(self.nonlinearity.as_str(), "cubic" | "cubic_quintic" | "polynomial") {
            return Err(CliError::config(format!("unknown nonlinearity `{}`", self.nonlinearity)));
        }
        Ok(())
    }

    pub fn build_nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        let nl = match self.nonlinearity.as_str() {
            "cubic" => Nonlinearity::cubic(self.dim)?,
            "cubic_quintic" => Nonlinearity::cubic_quintic(self.kappa, self.dim)?,
            "polynomial" => {
                if self.coeffs.is_empty() {
                    return Err(CliError::config("polynomial nonlinearity needs `coeffs`"));
                }
                Nonlinearity::polynomial(self.coeffs.clone(), self.dim)?
            }
            other => return Err(CliError::config(format!("unknown nonlinearity `{other}`"))),
        };
        Ok(match self.zeta {
            Some(z) => nl.with_zeta(z)?,
            None => nl,
        })
    }

    pub fn build_model(&self) -> Result<KirchhoffModel, CliError> {
        match self.model.as_str() {
            "affine" => {
                let f = InnerFunction::from_name(&self.f)
                    .ok_or_else(|| CliError::config(format!("unknown inner function `{}`", self.f)))?;
                Ok(KirchhoffModel::affine(self.a, self.b, f)?)
            }
            name => KirchhoffModel::general_from_name(name)
                .ok_or_else(|| CliError::config(format!("unknown model `{name}`"))),
        }
    }

    pub fn grid(&self) -> Result<RadialGrid, CliError> {
        Ok(RadialGrid::graded(self.dim, self.r_max, self.intervals, self.grading)?)
    }

    pub fn shooting(&self) -> ShootingConfig {
        ShootingConfig { bracket: self.beta_lo.zip(self.beta_hi), ..ShootingConfig::default() }
    }

    pub fn scan(&self) -> ScanConfig {
        ScanConfig { t_min: self.t_min, t_max: self.t_max, brackets: self.brackets, ..ScanConfig::default() }
    }
}

/// Successful pipeline output: the JSON result, CSV artifacts and
/// whether every certificate held.
pub struct RunOutput {
    pub result: Value,
    pub profiles: Vec<(String, RadialProfile)>,
    pub certified: bool,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn truncated(cfg: &RunConfig) -> Result<TruncatedNonlinearity, CliError> {
    Ok(truncate(&cfg.build_nonlinearity()?, &ProbeConfig::default())?)
}

fn schrodinger_summary(
    sol: &SchrodingerSolution,
    tnl: &TruncatedNonlinearity,
    cfg: &RunConfig,
) -> Result<(Value, bool), CliError> {
    let v = &sol.profile;
    let d = gradient_integral(v)?;
    let g_int = radial_integral(v, |s| tnl.primitive(s), IntegrandMode::Values)?;
    let n = cfg.dim as f64;
    let scale = 0.5 * (n - 2.0) * d;
    let pohozaev_defect = (scale - n * g_int).abs() / scale;
    let certificate = schrodinger_residual(v, tnl)?;
    let certified = certificate.passes(cfg.residual_tolerance) && pohozaev_defect <= cfg.tolerance;
    let value = json!({
        "beta": sol.beta,
        "bracket": [sol.bracket.0, sol.bracket.1],
        "bisections": sol.bisections,
        "tailStart": sol.tail_start,
        "rMax": v.grid().r_max(),
        "D": d,
        "gInt": g_int,
        "pohozaevDefect": pohozaev_defect,
        "certificate": to_value(&certificate),
    });
    Ok((value, certified))
}

fn run_validate(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let nl = cfg.build_nonlinearity()?;
    let probe = ProbeConfig::default();
    let report = validate_bl(&nl, &probe)?;
    let tnl = truncate(&nl, &probe)?;
    let growth = if nl.class() == MassClass::PositiveMass && tnl.mass() > 0.0 {
        Some(check_growth_inequality(&decompose(&tnl)?, &probe)?)
    } else {
        None
    };
    let certified = report.all_passed() && growth.as_ref().is_none_or(|g| g.rows.iter().all(|r| r.holds));
    Ok(RunOutput {
        result: json!({
            "validation": to_value(&report),
            "truncation": to_value(&TruncationSummary::from(&tnl)),
            "growth": growth.as_ref().map(to_value),
        }),
        profiles: Vec::new(),
        certified,
    })
}

fn run_solve_schrodinger(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let tnl = truncated(cfg)?;
    let sol = solve_schrodinger_ground_state(&tnl, &cfg.grid()?, &cfg.shooting())?;
    let (summary, certified) = schrodinger_summary(&sol, &tnl, cfg)?;
    Ok(RunOutput {
        result: json!({ "truncation": to_value(&TruncationSummary::from(&tnl)), "schrodinger": summary }),
        profiles: vec![("schrodinger_profile.csv".into(), sol.profile)],
        certified,
    })
}

fn run_solve_kirchhoff(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let tnl = truncated(cfg)?;
    let model = cfg.build_model()?;
    let sol = solve_schrodinger_ground_state(&tnl, &cfg.grid()?, &cfg.shooting())?;
    let (summary, mut certified) = schrodinger_summary(&sol, &tnl, cfg)?;
    let dv = gradient_integral(&sol.profile)?;
    let rescaling = find_tbar(&model, dv, cfg.dim, &cfg.scan())?;
    if rescaling.roots.is_empty() {
        return Err(CliError::solver(format!(
            "t² M(t^(2-N) D) = 1 has no root in [{}, {}] (min of Φ is {})",
            cfg.t_min, cfg.t_max, rescaling.phi_min
        )));
    }
    let mut profiles = vec![("schrodinger_profile.csv".to_string(), sol.profile.clone())];
    let mut solutions = Vec::new();
    for (k, &tbar) in rescaling.roots.iter().enumerate() {
        let built = construct_kirchhoff_solution(&sol.profile, &model, tbar, f64::INFINITY)?;
        let residual = kirchhoff_residual(&built.profile, &model, &tnl)?;
        let (_, inverse) = inverse_rescaling_check(&built.profile, &model, &tnl)?;
        let ok = built.summary.defect <= cfg.tolerance
            && residual.passes(cfg.residual_tolerance)
            && inverse.passes(cfg.residual_tolerance);
        certified &= ok;
        let file = format!("kirchhoff_profile_{k}.csv");
        solutions.push(json!({
            "profile": file,
            "rescaling": to_value(&built.summary),
            "certificate": to_value(&residual),
            "inverseCertificate": to_value(&inverse),
            "certified": ok,
        }));
        profiles.push((file, built.profile));
    }
    Ok(RunOutput {
        result: json!({
            "truncation": to_value(&TruncationSummary::from(&tnl)),
            "schrodinger": summary,
            "rescaling": to_value(&rescaling),
            "solutions": solutions,
        }),
        profiles,
        certified,
    })
}

fn run_thresholds(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    if !matches!(model, KirchhoffModel::AffineComposite { .. }) {
        return Err(CliError::config("thresholds need the affine model a + b f"));
    }
    let (d, source) = match cfg.d {
        Some(d) => (d, "config"),
        None => {
            let tnl = truncated(cfg)?;
            let sol = solve_schrodinger_ground_state(&tnl, &cfg.grid()?, &cfg.shooting())?;
            (gradient_integral(&sol.profile)?, "groundState")
        }
    };
    let report = thresholds(&model, d, cfg.dim, &cfg.scan())?;
    let relaxed = check_relaxed_condition(&model, d, cfg.dim, &cfg.scan())?;
    let certified = !report.b_within_delta1 || report.delta1_certified;
    Ok(RunOutput {
        result: json!({
            "DSource": source,
            "thresholds": to_value(&report),
            "relaxedCondition": to_value(&relaxed),
        }),
        profiles: Vec::new(),
        certified,
    })
}

fn run_ground_state(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.model != "affine" || cfg.f != "id" {
        return Err(CliError::config("ground-state needs the Kirchhoff model a + b s (model = affine, f = id)"));
    }
    let params = KirchhoffParams::new(cfg.a, cfg.b, cfg.dim)?;
    if !matches!(cfg.dim, 3 | 4) {
        return Err(PohozaevError::UnsupportedDimension(cfg.dim).into());
    }
    let tnl = truncated(cfg)?;
    let search_cfg =
        SearchConfig { grid: cfg.grid()?, shooting: cfg.shooting(), scan: cfg.scan(), tolerance: cfg.tolerance };
    let sol = solve_schrodinger_ground_state(&tnl, &search_cfg.grid, &search_cfg.shooting)?;
    let (summary, mut certified) = schrodinger_summary(&sol, &tnl, cfg)?;
    let search = ground_state_from_schrodinger(&tnl, &params, &search_cfg, sol)?;
    let u = search.selected_profile();
    let model = params.model();
    let selected = evaluate(u, &params, |s| tnl.primitive(s))?;
    let nondegeneracy = nondegeneracy_check(&selected, 1e-12)?;
    let residual = kirchhoff_residual(u, &model, &tnl)?;
    let (_, inverse) = inverse_rescaling_check(u, &model, &tnl)?;
    certified &= search.report.mu > 0.0
        && nondegeneracy.holds
        && residual.passes(cfg.residual_tolerance)
        && inverse.passes(cfg.residual_tolerance);
    Ok(RunOutput {
        result: json!({
            "truncation": to_value(&TruncationSummary::from(&tnl)),
            "schrodinger": summary,
            "groundState": to_value(&search.report),
            "nondegeneracy": to_value(&nondegeneracy),
            "certificate": to_value(&residual),
            "inverseCertificate": to_value(&inverse),
            "profile": "ground_state_profile.csv",
        }),
        profiles: vec![("ground_state_profile.csv".into(), u.clone())],
        certified,
    })
}

fn run_verify(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let path = cfg.profile.as_ref().ok_or_else(|| CliError::config("verify needs `profile`"))?;
    let file = fs::File::open(path).map_err(|e| CliError::config(format!("cannot open {path}: {e}")))?;
    let u = read_csv(BufReader::new(file), cfg.dim)?;
    let tnl = truncated(cfg)?;
    let model = cfg.build_model()?;
    let residual = kirchhoff_residual(&u, &model, &tnl)?;
    let (_, inverse) = inverse_rescaling_check(&u, &model, &tnl)?;
    let functionals = match KirchhoffParams::new(cfg.a, cfg.b, cfg.dim) {
        Ok(params) if model.kirchhoff_params().is_some() => {
            Some(to_value(&evaluate(&u, &params, |s| tnl.primitive(s))?))
        }
        _ => None,
    };
    let certified = residual.passes(cfg.residual_tolerance) && inverse.passes(cfg.residual_tolerance);
    Ok(RunOutput {
        result: json!({
            "nodes": u.grid().len(),
            "rMax": u.grid().r_max(),
            "certificate": to_value(&residual),
            "inverseCertificate": to_value(&inverse),
            "functionals": functionals,
        }),
        profiles: Vec::new(),
        certified,
    })
}

pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match kind {
        CommandKind::Validate => run_validate(cfg),
        CommandKind::SolveSchrodinger => run_solve_schrodinger(cfg),
        CommandKind::SolveKirchhoff => run_solve_kirchhoff(cfg),
        CommandKind::Thresholds => run_thresholds(cfg),
        CommandKind::GroundState => run_ground_state(cfg),
        CommandKind::Verify => run_verify(cfg),
    }
}

/// `{command, config, result}` as pretty JSON with a trailing newline.
pub fn render_report(kind: CommandKind, cfg: &RunConfig, output: &RunOutput) -> String {
    let mut report = BTreeMap::new();
    report.insert("command", Value::String(kind.name().into()));
    report.insert("config", to_value(cfg));
    report.insert("certified", Value::Bool(output.certified));
    report.insert("result", output.result.clone());
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    text
}

fn write_artifacts(dir: &Path, kind: CommandKind, cfg: &RunConfig, output: &RunOutput) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::config(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("report.json"), render_report(kind, cfg, output)).map_err(io)?;
    fs::write(dir.join("config.txt"), cfg.to_config_text()).map_err(io)?;
    for (name, profile) in &output.profiles {
        let mut w = BufWriter::new(fs::File::create(dir.join(name)).map_err(io)?);
        write_csv(profile, &mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// Parse arguments, run one command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    let (kind, args) = cli.command.split();
    let outcome = RunConfig::resolve(args).and_then(|cfg| {
        let output = execute(kind, &cfg)?;
        write_artifacts(&args.output_dir, kind, &cfg, &output)?;
        Ok(output.certified)
    });
    match outcome {
        Ok(true) => {
            println!("{}: ok ({})", kind.name(), args.output_dir.join("report.json").display());
            EXIT_OK
        }
        Ok(false) => {
            eprintln!("{}: certificate failed ({})", kind.name(), args.output_dir.join("report.json").display());
            EXIT_CERTIFICATE
        }
        Err(e) => {
            eprintln!("{}: {e}", kind.name());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("coeffs", "0,-0.3,1.3,-1").unwrap();
        cfg.set("zeta", "1").unwrap();
        cfg.set("t_min", "1e-5").unwrap();
        cfg.set("D", "0.1").unwrap();
        let mut back = RunConfig::default();
        for (k, v) in parse_config_text(&cfg.to_config_text()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file_and_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        fs::write(&path, "# sweep point\npreset = cubic_quintic4d\nb = 0.25\nkappa = 0.05\n").unwrap();
        let args = RunArgs { config: Some(path), b: Some(0.5), ..Default::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!((cfg.dim, cfg.kappa, cfg.b, cfg.nonlinearity.as_str()), (4, 0.05, 0.5, "cubic_quintic"));
    }

    #[test]
    fn invalid_settings_are_rejected() {
        for (k, v) in [("a", "-1"), ("N", "2"), ("f", "cosh"), ("t_max", "1e-5")] {
            let mut cfg = RunConfig::default();
            let r = cfg.set(k, v).and_then(|_| cfg.check());
            assert_eq!(r.unwrap_err().code, EXIT_INVALID_CONFIG, "{k} = {v}");
        }
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.set("colour", "red").unwrap_err().code, EXIT_INVALID_CONFIG);
        let args = RunArgs { preset: Some("cubic9d".into()), ..Default::default() };
        assert_eq!(RunConfig::resolve(&args).unwrap_err().code, EXIT_INVALID_CONFIG);
    }

    #[test]
    fn thresholds_example() {
        let mut cfg = RunConfig::default();
        for (k, v) in [("N", "3"), ("f", "id"), ("a", "0.5"), ("D", "1")] {
            cfg.set(k, v).unwrap();
        }
        let out = execute(CommandKind::Thresholds, &cfg).unwrap();
        assert_eq!(out.result["thresholds"]["delta1"], json!(0.5));
        assert_eq!(out.result["DSource"], json!("config"));
    }
}
