//! Discrete-time recurrent leaky integrate-and-fire network.
//!
//! One step maps `(v, z_prev, x)` to
//!
//! ```text
//! v'_j = alpha_j v_j + sum_{i != j} W_rec[j,i] z_prev_i + sum_i W_in[j,i] x_i - z_prev_j v_th
//! z'_j = H(v'_j - v_th)      (forced to 0 while neuron j is refractory)
//! alpha_j = exp(-dt / tau_m_j)
//! ```
//!
//! The input sample consumed by a step is the one aligned with the *new* time index,
//! so step `t` of [`run_network`] reads `inputs[t]` and produces `z^t`.
//! During refraction the membrane keeps integrating; only spiking is suppressed.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::rng::RandomSource;
use crate::signal::{decay_factor, AnalogSignal, SpikeRaster};

pub const DEFAULT_TAU_M_MS: f64 = 20.0;
pub const DEFAULT_GAMMA_PD: f64 = 0.3;
pub const DEFAULT_REFRACTORY_STEPS: u32 = 2;
pub const DEFAULT_DT_MS: f64 = 1.0;

/// Parameters and weights of a recurrent LIF network with a leaky linear readout.
///
/// Matrices are stored `post x pre`: `w_in` is `n_rec x n_in`, `w_rec` is
/// `n_rec x n_rec` (zero diagonal), `w_out` is `n_out x n_rec` and the broadcast
/// feedback matrix `feedback` is `n_rec x n_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub n_in: usize,
    pub n_rec: usize,
    pub n_out: usize,
    pub dt_ms: f64,
    pub tau_m_ms: Vec<f64>,
    pub v_th: f64,
    pub gamma_pd: f64,
    pub refractory_steps: Vec<u32>,
    /// Readout leak per step.
    pub kappa: f64,
    #[serde(with = "crate::matrix")]
    pub w_in: DMatrix<f64>,
    #[serde(with = "crate::matrix")]
    pub w_rec: DMatrix<f64>,
    #[serde(with = "crate::matrix")]
    pub w_out: DMatrix<f64>,
    pub b_out: Vec<f64>,
    #[serde(with = "crate::matrix")]
    pub feedback: DMatrix<f64>,
}

/// Hyperparameters for randomly initialised networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub n_in: usize,
    pub n_rec: usize,
    pub n_out: usize,
    pub dt_ms: f64,
    pub tau_m_ms: f64,
    pub v_th: f64,
    pub gamma_pd: f64,
    pub refractory_steps: u32,
    /// Readout leak; `None` means `exp(-dt / 20 ms)`.
    pub kappa: Option<f64>,
    /// Gain of the Gaussian input weights, divided by `sqrt(n_in)`.
    pub input_gain: f64,
    /// Gain of the Gaussian recurrent weights, divided by `sqrt(n_rec)`.
    pub recurrent_gain: f64,
    /// Gain of the Gaussian readout weights, divided by `sqrt(n_rec)`.
    pub output_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_in: 1,
            n_rec: 20,
            n_out: 1,
            dt_ms: DEFAULT_DT_MS,
            tau_m_ms: DEFAULT_TAU_M_MS,
            v_th: 1.0,
            gamma_pd: DEFAULT_GAMMA_PD,
            refractory_steps: DEFAULT_REFRACTORY_STEPS,
            kappa: None,
            input_gain: 1.0,
            recurrent_gain: 1.0,
            output_gain: 1.0,
        }
    }
}

impl NetworkConfig {
    /// Draws Gaussian weights and a uniform feedback matrix in `[-1/sqrt(n_out), 1/sqrt(n_out)]`.
    pub fn build(&self, rng: &mut RandomSource) -> Result<NetworkModel> {
        let mut model = NetworkModel::zeros(self.n_in, self.n_rec, self.n_out, self.dt_ms)?;
        model.tau_m_ms = vec![self.tau_m_ms; self.n_rec];
        model.v_th = self.v_th;
        model.gamma_pd = self.gamma_pd;
        model.refractory_steps = vec![self.refractory_steps; self.n_rec];
        if let Some(kappa) = self.kappa {
            model.kappa = kappa;
        }
        let scale = |gain: f64, fan_in: usize| gain / (fan_in.max(1) as f64).sqrt();
        let s_in = scale(self.input_gain, self.n_in);
        let s_rec = scale(self.recurrent_gain, self.n_rec);
        let s_out = scale(self.output_gain, self.n_rec);
        model.w_in = DMatrix::from_fn(self.n_rec, self.n_in, |_, _| s_in * rng.normal());
        model.w_rec = DMatrix::from_fn(self.n_rec, self.n_rec, |j, i| {
            let w = s_rec * rng.normal();
            if i == j {
                0.0
            } else {
                w
            }
        });
        model.w_out = DMatrix::from_fn(self.n_out, self.n_rec, |_, _| s_out * rng.normal());
        let b = 1.0 / (self.n_out.max(1) as f64).sqrt();
        model.feedback = DMatrix::from_fn(self.n_rec, self.n_out, |_, _| rng.uniform(-b, b));
        model.validate()?;
        Ok(model)
    }
}

impl NetworkModel {
    /// A silent network with default neuron parameters and all weights zero.
    pub fn zeros(n_in: usize, n_rec: usize, n_out: usize, dt_ms: f64) -> Result<Self> {
        if n_rec == 0 {
            return Err(domain("a network needs at least one recurrent neuron"));
        }
        let model = Self {
            n_in,
            n_rec,
            n_out,
            dt_ms,
            tau_m_ms: vec![DEFAULT_TAU_M_MS; n_rec],
            v_th: 1.0,
            gamma_pd: DEFAULT_GAMMA_PD,
            refractory_steps: vec![DEFAULT_REFRACTORY_STEPS; n_rec],
            kappa: decay_factor(DEFAULT_TAU_M_MS, dt_ms)?,
            w_in: DMatrix::zeros(n_rec, n_in),
            w_rec: DMatrix::zeros(n_rec, n_rec),
            w_out: DMatrix::zeros(n_out, n_rec),
            b_out: vec![0.0; n_out],
            feedback: DMatrix::zeros(n_rec, n_out),
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks shapes, parameter domains, finiteness and the zero self-connection rule.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_rec;
        let shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.shape() != (r, c) {
                Err(contract(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )))
            } else if m.iter().any(|v| !v.is_finite()) {
                Err(domain(format!("{name} has non-finite entries")))
            } else {
                Ok(())
            }
        };
        shape("w_in", &self.w_in, n, self.n_in)?;
        shape("w_rec", &self.w_rec, n, n)?;
        shape("w_out", &self.w_out, self.n_out, n)?;
        shape("feedback", &self.feedback, n, self.n_out)?;
        if self.b_out.len() != self.n_out || self.b_out.iter().any(|v| !v.is_finite()) {
            return Err(contract("b_out must hold n_out finite values"));
        }
        if self.tau_m_ms.len() != n || self.refractory_steps.len() != n {
            return Err(contract("tau_m_ms and refractory_steps need one entry per neuron"));
        }
        if let Some(j) = (0..n).find(|&j| self.w_rec[(j, j)] != 0.0) {
            return Err(contract(format!("w_rec has a self-connection on neuron {j}")));
        }
        if !(self.dt_ms > 0.0) || self.tau_m_ms.iter().any(|&t| !(t > 0.0)) {
            return Err(domain("dt_ms and every tau_m_ms must be positive"));
        }
        if !(self.v_th > 0.0) {
            return Err(domain(format!("v_th must be positive, got {}", self.v_th)));
        }
        if !(self.gamma_pd > 0.0) {
            return Err(domain(format!("gamma_pd must be positive, got {}", self.gamma_pd)));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(domain(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        Ok(())
    }

    /// Per-neuron membrane decay factors.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        self.tau_m_ms
            .iter()
            .map(|&tau| decay_factor(tau, self.dt_ms))
            .collect()
    }
}

/// Dynamic state of the recurrent layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub v: Vec<f64>,
    /// Steps of enforced silence left for each neuron.
    pub refrac_remaining: Vec<u32>,
    /// Spikes emitted by the last step.
    pub last_z: Vec<bool>,
    /// Whether each neuron was held refractory during the last step.
    pub refractory: Vec<bool>,
}

impl LifState {
    /// Silent state with the given membrane potentials.
    pub fn with_potentials(v: Vec<f64>) -> Self {
        let n = v.len();
        Self {
            v,
            refrac_remaining: vec![0; n],
            last_z: vec![false; n],
            refractory: vec![false; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::with_potentials(vec![0.0; n])
    }
}

/// One network update; returns the new state and the spikes it emitted.
pub fn lif_step(state: &LifState, x_t: &[f64], model: &NetworkModel) -> Result<(LifState, Vec<bool>)> {
    let mut next = state.clone();
    let alphas = model.alphas()?;
    advance(&mut next, x_t, model, &alphas)?;
    let spikes = next.last_z.clone();
    Ok((next, spikes))
}

/// In-place variant of [`lif_step`] with precomputed decay factors.
pub(crate) fn advance(state: &mut LifState, x_t: &[f64], model: &NetworkModel, alphas: &[f64]) -> Result<()> {
    let n = model.n_rec;
    if state.v.len() != n || state.refrac_remaining.len() != n || state.last_z.len() != n {
        return Err(contract(format!(
            "state holds {} neurons, model has {n}",
            state.v.len()
        )));
    }
    if x_t.len() != model.n_in {
        return Err(contract(format!(
            "input sample has {} channels, model expects {}",
            x_t.len(),
            model.n_in
        )));
    }
    let z_prev = &state.last_z;
    let mut v_new = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = alphas[j] * state.v[j];
        for (i, &zi) in z_prev.iter().enumerate() {
            if zi {
                v += model.w_rec[(j, i)];
            }
        }
        for (i, &xi) in x_t.iter().enumerate() {
            v += model.w_in[(j, i)] * xi;
        }
        if z_prev[j] {
            v -= model.v_th;
        }
        if !v.is_finite() {
            return Err(Error::NumericalBlowup { neuron: j, value: v });
        }
        v_new.push(v);
    }
    #[allow(clippy::needless_range_loop)] // four parallel per-neuron vectors
    for j in 0..n {
        let held = state.refrac_remaining[j] > 0;
        state.refractory[j] = held;
        if held {
            state.refrac_remaining[j] -= 1;
            state.last_z[j] = false;
        } else {
            let spike = v_new[j] >= model.v_th;
            state.last_z[j] = spike;
            if spike {
                state.refrac_remaining[j] = model.refractory_steps[j];
            }
        }
    }
    state.v = v_new;
    Ok(())
}

/// Spikes and membrane potentials of a simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    pub raster: SpikeRaster,
    /// `n_rec x T` membrane potentials after each step.
    pub voltages: DMatrix<f64>,
}

impl NetworkRun {
    /// CSV with a `step,v0,v1,...` header and one row per step.
    pub fn write_voltages_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.voltages.nrows();
        let header = std::iter::once("step".to_string()).chain((0..n).map(|j| format!("v{j}")));
        w.write_record(header)?;
        for (t, col) in self.voltages.column_iter().enumerate() {
            let row = std::iter::once(t.to_string()).chain(col.iter().map(f64::to_string));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates the network on a sampled input signal, starting silent at potentials `v0`.
pub fn run_network(inputs: &AnalogSignal, model: &NetworkModel, v0: &[f64]) -> Result<NetworkRun> {
    if (inputs.dt_ms() - model.dt_ms).abs() > 1e-12 * model.dt_ms {
        return Err(contract(format!(
            "input sampled at {} ms but model steps {} ms",
            inputs.dt_ms(),
            model.dt_ms
        )));
    }
    if inputs.channels() != model.n_in {
        return Err(contract(format!(
            "input has {} channels, model expects {}",
            inputs.channels(),
            model.n_in
        )));
    }
    simulate(inputs.rows(), model, v0)
}

/// Simulates over an arbitrary (possibly empty) sequence of input samples.
pub fn simulate<'a, I>(inputs: I, model: &NetworkModel, v0: &[f64]) -> Result<NetworkRun>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    model.validate()?;
    if v0.len() != model.n_rec {
        return Err(contract(format!(
            "v0 has {} entries, model has {} neurons",
            v0.len(),
            model.n_rec
        )));
    }
    let alphas = model.alphas()?;
    let mut state = LifState::with_potentials(v0.to_vec());
    let mut spikes = Vec::new();
    let mut volts: Vec<f64> = Vec::new();
    for x in inputs {
        advance(&mut state, x, model, &alphas)?;
        spikes.push(state.last_z.clone());
        volts.extend_from_slice(&state.v);
    }
    let steps = spikes.len();
    Ok(NetworkRun {
        raster: SpikeRaster::from_steps(&spikes, model.n_rec, model.dt_ms)?,
        voltages: DMatrix::from_column_slice(model.n_rec, steps, &volts),
    })
}
