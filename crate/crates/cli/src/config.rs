//! Experiment configuration documents.
//!
//! A config is a single JSON object:
//!
//! ```json
//! { "schema_version": 1, "kind": "budget_check", "seed": 1,
//!   "output_dir": "out/budget", "parameters": { "t_star_ms": 10 } }
//! ```
//!
//! Unknown keys are rejected at every level. `parameters` may be omitted, in
//! which case every kind-specific default applies.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EpropTrain,
    McSweep,
    BudgetCheck,
    SlowfastStudy,
    DdeStudy,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::EpropTrain => "eprop_train",
            ExperimentKind::McSweep => "mc_sweep",
            ExperimentKind::BudgetCheck => "budget_check",
            ExperimentKind::SlowfastStudy => "slowfast_study",
            ExperimentKind::DdeStudy => "dde_study",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Sine tracking with a recurrent LIF network trained by e-prop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpropParams {
    pub n_in: usize,
    pub n_rec: usize,
    pub steps: usize,
    pub dt_ms: f64,
    pub input_rate_hz: f64,
    pub period_ms: f64,
    pub amplitude: f64,
    pub tau_m_ms: f64,
    pub v_th: f64,
    pub gamma_pd: f64,
    pub refractory_steps: u32,
    pub input_gain: f64,
    pub recurrent_gain: f64,
    pub output_gain: f64,
    pub eta: f64,
    pub eta_readout: f64,
    pub train_readout: bool,
    pub tau_pre_ms: f64,
    pub epochs: usize,
    pub weight_bound: f64,
}

impl Default for EpropParams {
    fn default() -> Self {
        Self {
            n_in: 20,
            n_rec: 50,
            steps: 2000,
            dt_ms: 1.0,
            input_rate_hz: 20.0,
            period_ms: 500.0,
            amplitude: 1.0,
            tau_m_ms: 20.0,
            v_th: 1.0,
            gamma_pd: 0.3,
            refractory_steps: 2,
            input_gain: 2.0,
            recurrent_gain: 1.0,
            output_gain: 0.0,
            eta: 2e-3,
            eta_readout: 3e-5,
            train_readout: true,
            tau_pre_ms: 20.0,
            epochs: 30,
            weight_bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirActivation {
    Tanh,
    Identity,
}

/// Memory capacity of random echo state networks over a list of sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSweepParams {
    pub sizes: Vec<usize>,
    /// Independent reservoirs per size.
    pub reservoirs: usize,
    pub spectral_radius: f64,
    pub activation: ReservoirActivation,
    pub leak_c_ms: f64,
    pub input_scale: f64,
    /// Largest delay probed; `None` means twice the reservoir size.
    pub d_max: Option<usize>,
    pub input_length: usize,
    pub washout: usize,
    pub ridge: f64,
    /// Also measure a delay-line reservoir of each size.
    pub shift_register: bool,
}

impl Default for McSweepParams {
    fn default() -> Self {
        Self {
            sizes: vec![10, 20],
            reservoirs: 1,
            spectral_radius: 0.9,
            activation: ReservoirActivation::Tanh,
            leak_c_ms: 1.0,
            input_scale: 1.0,
            d_max: None,
            input_length: 10_000,
            washout: 200,
            ridge: 1e-8,
            shift_register: false,
        }
    }
}

/// Forgetting-factor budget of a leaky trace against a task timescale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetParams {
    pub t_star_ms: f64,
    pub forgetting_factor: f64,
    pub tau_pre_ms: f64,
    pub tau_m_ms: f64,
    pub dt_ms: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self {
            t_star_ms: 10.0,
            forgetting_factor: 0.5,
            tau_pre_ms: 20.0,
            tau_m_ms: 20.0,
            dt_ms: 1.0,
        }
    }
}

/// Planar slow-fast test systems, parameterised by the time-scale ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Testbed {
    /// `f = y - x`, `g = -y`.
    Linear,
    /// `f = y - (x^3/3 - x)`, `g = a - x`.
    Cubic { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlowfastParams {
    pub testbed: Testbed,
    /// Decreasing time-scale ratios for the gap study.
    pub epsilons: Vec<f64>,
    pub x0: f64,
    pub y0: f64,
    /// Horizon in slow time.
    pub horizon: f64,
    pub tol: f64,
    /// The gap is measured after `transient_factor * epsilon`.
    pub transient_factor: f64,
    /// Allowed deviation of successive gap ratios from the ratio of epsilons.
    pub ratio_tolerance: f64,
    /// Sample spacing (slow time) for the frame-equivalence comparison.
    pub frame_spacing: f64,
    pub manifold_y_lo: f64,
    pub manifold_y_hi: f64,
    pub manifold_samples: usize,
}

impl Default for SlowfastParams {
    fn default() -> Self {
        Self {
            testbed: Testbed::Linear,
            epsilons: vec![0.04, 0.02, 0.01],
            x0: 0.8,
            y0: 1.0,
            horizon: 3.0,
            tol: 1e-10,
            transient_factor: 5.0,
            ratio_tolerance: 0.2,
            frame_spacing: 0.01,
            manifold_y_lo: -1.0,
            manifold_y_hi: 1.0,
            manifold_samples: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Feedback {
    /// `F(x) = gain * x`.
    Linear { gain: f64 },
    /// `F(x) = tanh(gain * x)`.
    Tanh { gain: f64 },
    /// `F(x) = r x (1 - x)`.
    Logistic { r: f64 },
}

impl Feedback {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Feedback::Linear { gain } => gain * x,
            Feedback::Tanh { gain } => (gain * x).tanh(),
            Feedback::Logistic { r } => r * x * (1.0 - x),
        }
    }
}

/// Normalised delay equation against its singular-limit map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdeParams {
    pub epsilon: f64,
    pub feedback: Feedback,
    /// Constant history on `[-1, 0]`.
    pub history: f64,
    /// Number of delay intervals integrated.
    pub intervals: usize,
    pub tol: f64,
    pub samples_per_delay: usize,
}

impl Default for DdeParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            feedback: Feedback::Linear { gain: 0.5 },
            history: 1.0,
            intervals: 8,
            tol: 1e-9,
            samples_per_delay: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    EpropTrain(EpropParams),
    McSweep(McSweepParams),
    BudgetCheck(BudgetParams),
    SlowfastStudy(SlowfastParams),
    DdeStudy(DdeParams),
}

impl Parameters {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Parameters::EpropTrain(_) => ExperimentKind::EpropTrain,
            Parameters::McSweep(_) => ExperimentKind::McSweep,
            Parameters::BudgetCheck(_) => ExperimentKind::BudgetCheck,
            Parameters::SlowfastStudy(_) => ExperimentKind::SlowfastStudy,
            Parameters::DdeStudy(_) => ExperimentKind::DdeStudy,
        }
    }
}

/// A fully resolved experiment: every parameter carries its effective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub parameters: Parameters,
}

/// Where and why a config document was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    schema_version: u32,
    kind: ExperimentKind,
    seed: u64,
    output_dir: PathBuf,
    #[serde(borrow, default)]
    parameters: Option<&'a RawValue>,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn new(seed: u64, output_dir: impl Into<PathBuf>, parameters: Parameters) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: parameters.kind(),
            seed,
            output_dir: output_dir.into(),
            parameters,
        }
    }

    /// Parses and validates a config document; errors carry 1-based positions.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: e.line(),
            column: e.column(),
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        })?;
        let (pline, pcol) = match raw.parameters {
            Some(p) => position(text, p.get().as_ptr() as usize - text.as_ptr() as usize),
            None => (1, 1),
        };
        if raw.schema_version != SCHEMA_VERSION {
            let at = text.find("\"schema_version\"").unwrap_or(0);
            let (line, column) = position(text, at);
            return Err(ConfigError {
                line,
                column,
                message: format!(
                    "unsupported schema_version {} (this build reads version {SCHEMA_VERSION})",
                    raw.schema_version
                ),
            });
        }
        let body = raw.parameters.map_or("{}", |p| p.get());
        let relocate = |e: serde_json::Error| {
            let (line, column) = if e.line() <= 1 {
                (pline, pcol + e.column().saturating_sub(1))
            } else {
                (pline + e.line() - 1, e.column())
            };
            let detail = e.to_string();
            ConfigError {
                line,
                column,
                message: format!(
                    "parameters for {}: {}",
                    raw.kind,
                    detail.split(" at line ").next().unwrap_or_default()
                ),
            }
        };
        let parameters = match raw.kind {
            ExperimentKind::EpropTrain => Parameters::EpropTrain(serde_json::from_str(body).map_err(relocate)?),
            ExperimentKind::McSweep => Parameters::McSweep(serde_json::from_str(body).map_err(relocate)?),
            ExperimentKind::BudgetCheck => Parameters::BudgetCheck(serde_json::from_str(body).map_err(relocate)?),
            ExperimentKind::SlowfastStudy => {
                Parameters::SlowfastStudy(serde_json::from_str(body).map_err(relocate)?)
            }
            ExperimentKind::DdeStudy => Parameters::DdeStudy(serde_json::from_str(body).map_err(relocate)?),
        };
        Ok(Self {
            schema_version: raw.schema_version,
            kind: raw.kind,
            seed: raw.seed,
            output_dir: raw.output_dir,
            parameters,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
