use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::ControlProfile;
use crate::error::{Error, Result};
use crate::linear::{step_count, LinearModel};
use crate::nonlinear::NonlinearModel;
use crate::spectral::{PeriodicGrid, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Stabilize,
    Control,
    Observability,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stabilize => "stabilize",
            Command::Control => "control",
            Command::Observability => "observability",
            Command::Verify => "verify",
        }
    }
}

/// One scenario, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub profile: ProfileConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub initial_data: Option<FieldSpec>,
    #[serde(default)]
    pub target_data: Option<FieldSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// `K`, the retained band `|k| ≤ K`.
    pub n_modes: usize,
    #[serde(default)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub beta0: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default)]
    pub beta_high: f64,
    #[serde(default = "default_order")]
    pub order_l: u32,
    /// Defaults to off for `simulate` and on otherwise.
    #[serde(default)]
    pub feedback: Option<bool>,
    /// `c₀…c₃`; defaults to the fifth-order KdV values.
    #[serde(default)]
    pub coefficients: Option<[f64; 4]>,
    #[serde(default)]
    pub hierarchy: bool,
}

fn default_order() -> u32 {
    2
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            epsilon: 0.0,
            beta0: 0.0,
            beta1: 0.0,
            beta_high: 0.0,
            order_l: 2,
            feedback: None,
            coefficients: None,
            hierarchy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Bump { center: f64, radius: f64 },
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the command given on the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Use the linear flow (simulate, stabilize) or the linear controller (control).
    #[serde(default)]
    pub linear: bool,
    /// `s`-weighted linear control.
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
    /// Sobolev indices reported in `norms.csv`; defaults to `[0, s]`.
    #[serde(default)]
    pub norms: Option<Vec<f64>>,
    /// Signal CSV whose control drives a `simulate` run.
    #[serde(default)]
    pub signal: Option<String>,
}

fn default_s() -> f64 {
    2.5
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    30
}
fn default_relaxation() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    1e-2
}
fn default_blowup() -> f64 {
    1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    /// `u(x_j, t)` on the collocation grid.
    #[default]
    Physical,
    /// `|û_k(t)|` for `k = 0..K`.
    Modes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default)]
    pub trajectory: TrajectoryFormat,
    /// Write every `sample_every`-th time level.
    #[serde(default = "default_sample")]
    pub sample_every: usize,
}

fn default_sample() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            trajectory: TrajectoryFormat::Physical,
            sample_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedShape {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: i64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Initial or target data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// `mean + amplitude·sin(mode x)` or the cosine.
    Named {
        name: NamedShape,
        #[serde(default = "default_mode")]
        mode: i64,
        amplitude: f64,
        #[serde(default)]
        mean: f64,
    },
    /// `mean + Σ cos_k cos(kx) + sin_k sin(kx)`.
    Trig {
        #[serde(default)]
        mean: f64,
        terms: Vec<TrigTerm>,
    },
    /// `û(k)` for `k ≥ 0`; the conjugate partners are filled in.
    Coefficients { modes: Vec<ModeEntry> },
    /// Gaussian coefficients on `1 ≤ k ≤ max_mode`, scaled to `‖u‖_s = amplitude`.
    Random { amplitude: f64, max_mode: usize },
}

fn default_mode() -> i64 {
    1
}

/// A validation failure tied to a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses and validates, reporting `line:column` for syntax and schema errors
/// and the line of the offending key for range errors.
pub fn parse_config(text: &str, source: &str) -> std::result::Result<ScenarioConfig, String> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        format!("{source}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string()))
    })?;
    cfg.validate().map_err(|e| describe(text, source, &e))?;
    Ok(cfg)
}

pub(crate) fn describe(text: &str, source: &str, e: &FieldError) -> String {
    match locate(text, &e.path) {
        Some(line) => format!("{source}:{line}: {}: {}", e.path, e.message),
        None => format!("{source}: {}: {}", e.path, e.message),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Line of the key named by the last segment of `path`, searched after the
/// keys of its parents.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut from = 0;
    for seg in path.split('.') {
        let key = seg.split('[').next().unwrap_or(seg);
        let needle = format!("\"{key}\"");
        from += text[from..].find(&needle)?;
    }
    Some(text[..from].matches('\n').count() + 1)
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> std::result::Result<(), FieldError> {
    if ok {
        Ok(())
    } else {
        Err(FieldError::new(path, message))
    }
}

fn finite(v: f64, path: &str) -> std::result::Result<(), FieldError> {
    check(v.is_finite(), path, format!("must be finite, got {v}"))
}

impl ScenarioConfig {
    pub fn validate(&self) -> std::result::Result<(), FieldError> {
        let k = self.grid.n_modes;
        check((1..=512).contains(&k), "grid.n_modes", format!("must lie in [1, 512], got {k}"))?;
        if let Some(n) = self.grid.n_points {
            let min = 2 * k + 1;
            check(n >= min, "grid.n_points", format!("must be at least 2K+1 = {min}, got {n}"))?;
        }
        let m = &self.model;
        for (v, p) in [
            (m.epsilon, "model.epsilon"),
            (m.beta0, "model.beta0"),
            (m.beta1, "model.beta1"),
            (m.beta_high, "model.beta_high"),
        ] {
            finite(v, p)?;
        }
        check(m.epsilon >= 0.0, "model.epsilon", format!("must be nonnegative, got {}", m.epsilon))?;
        check((2..=8).contains(&m.order_l), "model.order_l", format!("must lie in [2, 8], got {}", m.order_l))?;
        if let Some(c) = m.coefficients {
            for (i, v) in c.iter().enumerate() {
                finite(*v, &format!("model.coefficients[{i}]"))?;
            }
        }
        check(
            !(m.hierarchy && m.order_l <= 2),
            "model.hierarchy",
            "the hierarchy term needs order_l > 2",
        )?;
        if let ProfileConfig::Bump { center, radius } = self.profile {
            check(
                radius > 0.0 && radius < PI,
                "profile.radius",
                format!("must lie in (0, pi), got {radius}"),
            )?;
            check(
                (0.0..2.0 * PI).contains(&center),
                "profile.center",
                format!("must lie in [0, 2pi), got {center}"),
            )?;
        }
        let r = &self.run;
        check(r.t_final > 0.0 && r.t_final.is_finite(), "run.t_final", format!("must be positive, got {}", r.t_final))?;
        check(r.dt > 0.0 && r.dt.is_finite(), "run.dt", format!("must be positive, got {}", r.dt))?;
        step_count(r.t_final, r.dt).map_err(|e| FieldError::new("run.dt", e.to_string()))?;
        check(r.s >= 0.0 && r.s.is_finite(), "run.s", format!("must be nonnegative, got {}", r.s))?;
        check(r.tol > 0.0 && r.tol.is_finite(), "run.tol", format!("must be positive, got {}", r.tol))?;
        check(r.max_iterations >= 1, "run.max_iterations", "must be at least 1")?;
        check(
            r.relaxation > 0.0 && r.relaxation <= 1.0,
            "run.relaxation",
            format!("must lie in (0, 1], got {}", r.relaxation),
        )?;
        check(r.rho > 0.0, "run.rho", format!("must be positive, got {}", r.rho))?;
        check(r.blowup_factor > 1.0, "run.blowup_factor", format!("must exceed 1, got {}", r.blowup_factor))?;
        if let Some(ns) = &r.norms {
            for (i, s) in ns.iter().enumerate() {
                check(*s >= 0.0 && s.is_finite(), &format!("run.norms[{i}]"), format!("must be nonnegative, got {s}"))?;
            }
        }
        check(self.output.sample_every >= 1, "output.sample_every", "must be at least 1")?;
        if let Some(f) = &self.initial_data {
            f.validate("initial_data", k)?;
        }
        if let Some(f) = &self.target_data {
            f.validate("target_data", k)?;
        }
        Ok(())
    }

    /// Checks that depend on the command.
    pub fn validate_for(&self, command: Command) -> std::result::Result<(), FieldError> {
        if let Some(c) = self.run.command {
            check(
                c == command,
                "run.command",
                format!("config is for '{}' but '{}' was requested", c.name(), command.name()),
            )?;
        }
        match command {
            Command::Simulate | Command::Stabilize => {
                check(self.initial_data.is_some(), "initial_data", "required for this command")?;
            }
            Command::Control => {
                check(self.target_data.is_some(), "target_data", "required for control")?;
            }
            _ => {}
        }
        if command == Command::Stabilize {
            check(self.model.feedback != Some(false), "model.feedback", "stabilize requires feedback")?;
        }
        if command != Command::Simulate {
            check(self.run.signal.is_none(), "run.signal", "only simulate runs accept a signal")?;
        }
        check(
            !(self.run.weighted && !(command == Command::Control && self.run.linear)),
            "run.weighted",
            "weighted control needs command control with run.linear = true",
        )?;
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        match self.grid.n_points {
            Some(n) => PeriodicGrid::with_points(self.grid.n_modes, n),
            None => PeriodicGrid::new(self.grid.n_modes),
        }
    }

    pub fn profile(&self, grid: &PeriodicGrid) -> Result<ControlProfile> {
        match self.profile {
            ProfileConfig::Bump { center, radius } => ControlProfile::bump(grid, center, radius),
            ProfileConfig::Uniform => Ok(ControlProfile::uniform(grid)),
        }
    }

    pub fn linear_model(&self, grid: &PeriodicGrid, command: Command) -> Result<LinearModel> {
        let m = &self.model;
        let feedback = m.feedback.unwrap_or(command != Command::Simulate);
        let model = LinearModel::new(self.profile(grid)?)
            .with_epsilon(m.epsilon)
            .with_betas(m.beta0, m.beta1)
            .with_order(m.order_l)
            .with_feedback(feedback);
        let model = LinearModel {
            beta_high: m.beta_high,
            ..model
        };
        model.validate()?;
        Ok(model)
    }

    pub fn nonlinear_model(&self, grid: &PeriodicGrid, command: Command) -> Result<NonlinearModel> {
        let linear = self.linear_model(grid, command)?;
        let mut model = match self.model.coefficients {
            Some(c) => NonlinearModel::new(linear, c),
            None => NonlinearModel::kdv5(linear),
        };
        model.hierarchy_term = self.model.hierarchy;
        model.validate()?;
        Ok(model)
    }

    pub fn norm_indices(&self) -> Vec<f64> {
        self.run.norms.clone().unwrap_or_else(|| vec![0.0, self.run.s])
    }
}

impl FieldSpec {
    fn validate(&self, path: &str, n_modes: usize) -> std::result::Result<(), FieldError> {
        let kmax = n_modes as i64;
        match self {
            FieldSpec::Zero => Ok(()),
            FieldSpec::Named { mode, amplitude, mean, .. } => {
                check(
                    (1..=kmax).contains(mode),
                    &format!("{path}.mode"),
                    format!("must lie in [1, {kmax}], got {mode}"),
                )?;
                finite(*amplitude, &format!("{path}.amplitude"))?;
                finite(*mean, &format!("{path}.mean"))
            }
            FieldSpec::Trig { mean, terms } => {
                finite(*mean, &format!("{path}.mean"))?;
                for (i, t) in terms.iter().enumerate() {
                    let p = format!("{path}.terms[{i}]");
                    check((1..=kmax).contains(&t.k), &format!("{p}.k"), format!("must lie in [1, {kmax}], got {}", t.k))?;
                    finite(t.cos, &format!("{p}.cos"))?;
                    finite(t.sin, &format!("{p}.sin"))?;
                }
                Ok(())
            }
            FieldSpec::Coefficients { modes } => {
                for (i, m) in modes.iter().enumerate() {
                    let p = format!("{path}.modes[{i}]");
                    check((0..=kmax).contains(&m.k), &format!("{p}.k"), format!("must lie in [0, {kmax}], got {}", m.k))?;
                    finite(m.re, &format!("{p}.re"))?;
                    finite(m.im, &format!("{p}.im"))?;
                    check(m.k != 0 || m.im == 0.0, &format!("{p}.im"), "the mean coefficient must be real")?;
                }
                Ok(())
            }
            FieldSpec::Random { amplitude, max_mode } => {
                finite(*amplitude, &format!("{path}.amplitude"))?;
                check(
                    (1..=n_modes).contains(max_mode),
                    &format!("{path}.max_mode"),
                    format!("must lie in [1, {n_modes}], got {max_mode}"),
                )
            }
        }
    }

    /// Builds the field; `Random` draws from `seed` and is scaled in `H^s`.
    pub fn build(&self, grid: &PeriodicGrid, seed: u64, s: f64) -> Result<SpectralField> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let pair = |k: i64, z: Complex64| [(k, z), (-k, z.conj())];
        let mut modes: Vec<(i64, Complex64)> = Vec::new();
        match self {
            FieldSpec::Zero => {}
            FieldSpec::Named { name, mode, amplitude, mean } => {
                modes.push((0, c(*mean, 0.0)));
                let z = match name {
                    NamedShape::Cos => c(0.5 * amplitude, 0.0),
                    NamedShape::Sin => c(0.0, -0.5 * amplitude),
                };
                modes.extend(pair(*mode, z));
            }
            FieldSpec::Trig { mean, terms } => {
                modes.push((0, c(*mean, 0.0)));
                for t in terms {
                    modes.extend(pair(t.k, c(0.5 * t.cos, -0.5 * t.sin)));
                }
            }
            FieldSpec::Coefficients { modes: list } => {
                for m in list {
                    if m.k == 0 {
                        modes.push((0, c(m.re, 0.0)));
                    } else {
                        modes.extend(pair(m.k, c(m.re, m.im)));
                    }
                }
            }
            FieldSpec::Random { amplitude, max_mode } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for k in 1..=*max_mode as i64 {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    modes.extend(pair(k, c(re, im)));
                }
                let u = SpectralField::from_modes(grid, &modes)?;
                let n = crate::spectral::sobolev_norm(&u, s);
                return Ok(if n > 0.0 { u.scale(amplitude / n) } else { u });
            }
        }
        SpectralField::from_modes(grid, &modes).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "grid": {"n_modes": 8},
  "profile": {"kind": "bump", "center": 3.14, "radius": 2.0},
  "run": {"t_final": 1.0, "dt": 0.01},
  "initial_data": {"kind": "named", "name": "sin", "amplitude": 0.001}
}"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(BASE, "cfg.json").unwrap();
        assert_eq!(cfg.grid.n_modes, 8);
        assert_eq!(cfg.run.s, 2.5);
        assert_eq!(cfg.norm_indices(), vec![0.0, 2.5]);
    }

    #[test]
    fn range_errors_name_field_and_line() {
        let text = BASE.replace("\"radius\": 2.0", "\"radius\": 4");
        let e = parse_config(&text, "cfg.json").unwrap_err();
        assert!(e.starts_with("cfg.json:3: profile.radius"), "{e}");
        assert!(e.contains("(0, pi)"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = BASE.replace("\"dt\": 0.01", "\"dt\": 0.01, \"dtt\": 1");
        let e = parse_config(&text, "cfg.json").unwrap_err();
        assert!(e.starts_with("cfg.json:4:"), "{e}");
        assert!(e.contains("dtt"), "{e}");
    }

    #[test]
    fn named_fields_are_exact() {
        let grid = PeriodicGrid::new(4).unwrap();
        let f = FieldSpec::Named {
            name: NamedShape::Sin,
            mode: 2,
            amplitude: 3.0,
            mean: 0.5,
        }
        .build(&grid, 0, 2.5)
        .unwrap();
        let g = SpectralField::from_fn(&grid, |x| 0.5 + 3.0 * (2.0 * x).sin());
        assert!((&f - &g).max_abs() < 1e-15);
    }
}
