//! The TOML run configuration.
//!
//! ```toml
//! [model]
//! alpha = 1.5707963267948966
//! r0 = 1.0
//! drift = { kind = "constant", params = [0.2] }
//! reset = { kind = "linear", params = [0.5] }
//!
//! [noise]
//! epsilon = 0.1
//! p = 2.0
//! sigma = 1
//! zeta = 0.0
//! angular = "none"
//!
//! [numerics]
//! dt = 0.001
//! horizon = 4.0
//! seed = 0
//!
//! [experiment]
//! mode = "lln"
//! eps_grid = [0.02, 0.05, 0.1, 0.2]
//! replicas = 2000
//! beta = 1
//! nu = 1.5
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use skorolab::experiments::{ExperimentConfig, Mode};
use skorolab::stochastic::NoiseParams;
use skorolab::system::{Drift, MonotoneCubic, Reset, SystemSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub noise: NoiseSection,
    pub numerics: NumericsSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alpha: f64,
    pub r0: f64,
    pub drift: MapSection,
    pub reset: MapSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            alpha: FRAC_PI_2,
            r0: 1.0,
            drift: MapSection {
                kind: MapKind::Constant,
                params: vec![0.2],
                table: vec![],
            },
            reset: MapSection {
                kind: MapKind::Linear,
                params: vec![0.5],
                table: vec![],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Constant,
    Tanh,
    Linear,
    Saturating,
    CustomTable,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub kind: MapKind,
    #[serde(default)]
    pub params: Vec<f64>,
    /// `(x, value)` pairs for `custom-table`.
    #[serde(default)]
    pub table: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AngularKind {
    /// `f ≡ 0`
    #[default]
    None,
    /// `f(r, θ) = 0.5 tanh(r)`
    TanhR,
    /// `f(r, θ) = 0.5 sin(θ)`
    SinTheta,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub epsilon: f64,
    pub p: f64,
    pub sigma: u8,
    pub zeta: f64,
    pub angular: AngularKind,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            p: 2.0,
            sigma: 1,
            zeta: 0.0,
            angular: AngularKind::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Lln,
    Clt,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub mode: ModeName,
    pub eps_grid: Vec<f64>,
    pub replicas: usize,
    pub beta: u32,
    pub nu: f64,
    pub calibrate: bool,
    pub zero_fluctuation: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Lln,
            eps_grid: vec![0.02, 0.05, 0.1, 0.2],
            replicas: 2000,
            beta: 1,
            nu: 1.5,
            calibrate: false,
            zero_fluctuation: false,
        }
    }
}

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: SystemSpec,
    pub noise: NoiseParams,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub mode: Mode,
    pub experiment: ExperimentConfig,
}

fn config_error(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {reason}"))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if path == "." || path.is_empty() {
                CliError::Config(msg)
            } else {
                config_error(&path, msg)
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<RunConfig, CliError> {
        let m = &self.model;
        let spec = build_spec(m)?;

        let n = &self.noise;
        if !(n.p > 1.0) {
            return Err(config_error("noise.p", format!("must satisfy p > 1, got {}", n.p)));
        }
        if !(n.epsilon >= 0.0 && n.epsilon < 1.0) {
            return Err(config_error("noise.epsilon", format!("must lie in [0, 1), got {}", n.epsilon)));
        }
        let mut noise =
            NoiseParams::new(n.epsilon, n.p, n.sigma, n.zeta).map_err(|e| config_error("noise", e))?;
        let f: Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> = match n.angular {
            AngularKind::None => None,
            AngularKind::TanhR => Some(Arc::new(|r: f64, _| 0.5 * r.tanh())),
            AngularKind::SinTheta => Some(Arc::new(|_, th: f64| 0.5 * th.sin())),
        };
        if let Some(f) = f {
            noise = noise
                .with_angular_drift(f, m.alpha, 10.0 * m.r0.max(1.0))
                .map_err(|e| config_error("noise.angular", e))?;
        }

        let x = &self.numerics;
        if !(x.dt > 0.0 && x.dt.is_finite()) {
            return Err(config_error("numerics.dt", format!("must be positive, got {}", x.dt)));
        }
        spec.horizon_index(x.horizon)
            .map_err(|e| config_error("numerics.horizon", e))?;

        let e = &self.experiment;
        if !(e.nu > 1.0 && e.nu < n.p) {
            return Err(config_error(
                "experiment.nu",
                format!("must satisfy 1 < nu < p = {}, got {}", n.p, e.nu),
            ));
        }
        if !(e.beta == 1 || e.beta == 2) {
            return Err(config_error("experiment.beta", format!("must be 1 or 2, got {}", e.beta)));
        }
        if e.replicas == 0 {
            return Err(config_error("experiment.replicas", "must be positive"));
        }
        if let Some(bad) = e.eps_grid.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(config_error("experiment.eps_grid", format!("every value must lie in (0, 1), got {bad}")));
        }
        let experiment = ExperimentConfig {
            eps_grid: e.eps_grid.clone(),
            replicas: e.replicas,
            beta: e.beta,
            nu: e.nu,
            p: n.p,
            dt: x.dt,
            horizon: x.horizon,
            seed: x.seed,
            calibrate: e.calibrate,
            zero_fluctuation: e.zero_fluctuation,
        };
        experiment.validate(&spec).map_err(|e| config_error("experiment", e))?;
        Ok(RunConfig {
            spec,
            noise,
            dt: x.dt,
            horizon: x.horizon,
            seed: x.seed,
            mode: match e.mode {
                ModeName::Lln => Mode::Lln,
                ModeName::Clt => Mode::Clt,
            },
            experiment,
        })
    }
}

fn one_param(section: &str, map: &MapSection) -> Result<f64, CliError> {
    match map.params.as_slice() {
        [v] if v.is_finite() => Ok(*v),
        other => Err(config_error(
            &format!("{section}.params"),
            format!("{:?} takes exactly one finite parameter, got {other:?}", map.kind),
        )),
    }
}

fn table(section: &str, map: &MapSection) -> Result<MonotoneCubic, CliError> {
    let pts: Vec<(f64, f64)> = map.table.iter().map(|p| (p[0], p[1])).collect();
    MonotoneCubic::new(&pts).map_err(|e| config_error(&format!("{section}.table"), e))
}

fn build_spec(m: &ModelSection) -> Result<SystemSpec, CliError> {
    let drift = match m.drift.kind {
        MapKind::Constant => Drift::Constant(one_param("model.drift", &m.drift)?),
        MapKind::Tanh => Drift::Tanh(one_param("model.drift", &m.drift)?),
        MapKind::CustomTable => Drift::Table(table("model.drift", &m.drift)?),
        other => {
            return Err(config_error(
                "model.drift.kind",
                format!("{other:?} is not a drift; use constant, tanh or custom-table"),
            ))
        }
    };
    let reset = match m.reset.kind {
        MapKind::Linear => Reset::Linear(one_param("model.reset", &m.reset)?),
        MapKind::Saturating => Reset::Saturating(one_param("model.reset", &m.reset)?),
        MapKind::CustomTable => Reset::Table(table("model.reset", &m.reset)?),
        other => {
            return Err(config_error(
                "model.reset.kind",
                format!("{other:?} is not a reset map; use linear, saturating or custom-table"),
            ))
        }
    };
    SystemSpec::builtin(drift, reset, m.alpha, m.r0).map_err(|e| config_error("model", e))
}
