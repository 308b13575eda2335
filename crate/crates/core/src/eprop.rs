//! Online three-factor learning (e-prop) for the LIF network in [`crate::lif`].
//!
//! The error gradient for a synapse `i -> j` factorises over time into a
//! broadcast learning signal `L_j^t` and a local eligibility trace `e_ji^t`:
//!
//! ```text
//! dE/dW_ji = sum_t L_j^t e_ji^t                      (batch form)
//! dW_ji^t  = -eta L_j^t e_ji^t                       (online form)
//! e_ji^t   = psi_j^t zbar_i^t                        (same-step eligibility)
//! zbar_i^t = alpha_pre zbar_i^{t-1} + z_i^t
//! psi_j^t  = gamma_pd / v_th * max(0, 1 - |(v_j^t - v_th) / v_th|), 0 while refractory
//! y_k^t    = kappa y_k^{t-1} + sum_j W_out[k,j] z_j^t + b_k
//! L_j^t    = sum_k B[j,k] (y_k^t - y*_k^t)
//! ```
//!
//! Filtered presynaptic traces are kept once per sending neuron (and per input
//! channel), not per synapse.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::lif::{advance, LifState, NetworkModel};
use crate::signal::{check_alpha, decay_factor, AnalogSignal};

/// Piecewise-linear surrogate for `dz/dv`.
pub fn pseudo_derivative(v: f64, v_th: f64, gamma_pd: f64, in_refractory: bool) -> Result<f64> {
    if !(v_th > 0.0) {
        return Err(domain(format!("v_th must be positive, got {v_th}")));
    }
    if in_refractory {
        return Ok(0.0);
    }
    Ok(gamma_pd / v_th * (1.0 - ((v - v_th) / v_th).abs()).max(0.0))
}

#[inline]
pub fn eligibility_trace(psi_j: f64, zbar_i: f64) -> f64 {
    psi_j * zbar_i
}

/// Eligibility matrix `e[j,i] = psi[j] * zbar[i]`; the diagonal is cleared for recurrent projections.
pub fn eligibility_matrix(psi: &[f64], zbar: &[f64], projection: Projection) -> DMatrix<f64> {
    DMatrix::from_fn(psi.len(), zbar.len(), |j, i| {
        if projection == Projection::Recurrent && i == j {
            0.0
        } else {
            eligibility_trace(psi[j], zbar[i])
        }
    })
}

/// Which weight matrix a delta is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Input,
    Recurrent,
}

/// Filtered presynaptic activity, one trace per sending unit.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityState {
    pub zbar: Vec<f64>,
    pub alpha_pre: Vec<f64>,
}

impl EligibilityState {
    pub fn new(units: usize, tau_pre_ms: f64, dt_ms: f64) -> Result<Self> {
        let alpha = decay_factor(tau_pre_ms, dt_ms)?;
        Ok(Self {
            zbar: vec![0.0; units],
            alpha_pre: vec![alpha; units],
        })
    }

    /// Advances every trace by one step of the exponential filter.
    pub fn push<I: IntoIterator<Item = f64>>(&mut self, activity: I) {
        for ((zb, &a), z) in self.zbar.iter_mut().zip(&self.alpha_pre).zip(activity) {
            *zb = a * *zb + z;
        }
    }
}

/// Pseudo-derivatives of every recurrent neuron in its current state.
pub fn pseudo_derivatives(state: &LifState, model: &NetworkModel) -> Result<Vec<f64>> {
    state
        .v
        .iter()
        .zip(&state.refractory)
        .map(|(&v, &refr)| pseudo_derivative(v, model.v_th, model.gamma_pd, refr))
        .collect()
}

/// Leaky readout `y = kappa * y_prev + W_out z + b_out`.
pub fn readout_step(y_prev: &[f64], z_t: &[bool], model: &NetworkModel) -> Result<Vec<f64>> {
    if y_prev.len() != model.n_out || z_t.len() != model.n_rec {
        return Err(contract(format!(
            "readout expects {} outputs and {} spikes, got {} and {}",
            model.n_out,
            model.n_rec,
            y_prev.len(),
            z_t.len()
        )));
    }
    Ok((0..model.n_out)
        .map(|k| {
            let drive: f64 = z_t
                .iter()
                .enumerate()
                .filter(|(_, &z)| z)
                .map(|(j, _)| model.w_out[(k, j)])
                .sum();
            model.kappa * y_prev[k] + drive + model.b_out[k]
        })
        .collect())
}

/// Broadcast learning signal `L = B (y - y*)`.
pub fn learning_signal(y: &[f64], y_star: &[f64], feedback: &DMatrix<f64>) -> Result<Vec<f64>> {
    if y.len() != y_star.len() || feedback.ncols() != y.len() {
        return Err(contract(format!(
            "learning signal: y has {}, y* has {}, feedback is {}x{}",
            y.len(),
            y_star.len(),
            feedback.nrows(),
            feedback.ncols()
        )));
    }
    Ok(feedback
        .row_iter()
        .map(|row| row.iter().zip(y.iter().zip(y_star)).map(|(b, (a, t))| b * (a - t)).sum())
        .collect())
}

/// Single-step weight delta `-eta * L_j * e_ji`; recurrent self-connections never change.
pub fn online_update(
    w: &DMatrix<f64>,
    projection: Projection,
    eta: f64,
    l: &[f64],
    e: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !(eta >= 0.0) {
        return Err(domain(format!("learning rate must be non-negative, got {eta}")));
    }
    if e.shape() != w.shape() || l.len() != w.nrows() {
        return Err(contract(format!(
            "update: W is {:?}, eligibility is {:?}, learning signal has {}",
            w.shape(),
            e.shape(),
            l.len()
        )));
    }
    Ok(DMatrix::from_fn(w.nrows(), w.ncols(), |j, i| {
        if projection == Projection::Recurrent && i == j {
            0.0
        } else {
            -eta * l[j] * e[(j, i)]
        }
    }))
}

/// Batch gradient `sum_t L_j^t e_ji^t`.
pub fn batch_gradient(l_history: &[Vec<f64>], e_history: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if l_history.len() != e_history.len() {
        return Err(contract(format!(
            "histories differ in length: {} learning signals, {} eligibility matrices",
            l_history.len(),
            e_history.len()
        )));
    }
    let Some(first) = e_history.first() else {
        return Err(contract("empty history"));
    };
    let mut grad = DMatrix::zeros(first.nrows(), first.ncols());
    for (l, e) in l_history.iter().zip(e_history) {
        if e.shape() != grad.shape() || l.len() != grad.nrows() {
            return Err(contract("inconsistent shapes within history"));
        }
        for i in 0..grad.ncols() {
            for j in 0..grad.nrows() {
                grad[(j, i)] += l[j] * e[(j, i)];
            }
        }
    }
    Ok(grad)
}

/// When weight deltas take effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Applied at the end of every step.
    Online,
    /// Accumulated with frozen weights and applied once after the run.
    Accumulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub eta: f64,
    pub tau_pre_ms: f64,
    pub mode: UpdateMode,
    pub train_input: bool,
    pub train_recurrent: bool,
    /// Also descend on `W_out` and `b_out` using the readout-filtered spike trace.
    pub train_readout: bool,
    /// Readout learning rate; defaults to `eta`.
    pub eta_readout: Option<f64>,
    /// Training aborts once any trained matrix exceeds this Frobenius norm.
    pub weight_bound: f64,
    /// Keep per-step learning signals and eligibility matrices.
    pub record_traces: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            tau_pre_ms: 20.0,
            mode: UpdateMode::Online,
            train_input: true,
            train_recurrent: true,
            train_readout: false,
            eta_readout: None,
            weight_bound: 1e3,
            record_traces: false,
        }
    }
}

/// Per-step histories kept when [`TrainOptions::record_traces`] is set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceHistory {
    pub learning_signals: Vec<Vec<f64>>,
    pub e_in: Vec<DMatrix<f64>>,
    pub e_rec: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRecord {
    /// Mean squared output error at each step.
    pub losses: Vec<f64>,
    /// `n_out x T` readout trajectory.
    #[serde(with = "crate::matrix")]
    pub outputs: DMatrix<f64>,
    /// Frobenius norm of the accumulated weight change after each step.
    pub weight_change_norms: Vec<f64>,
    pub options: TrainOptions,
    pub final_model: NetworkModel,
    /// Summed input-weight deltas of the run.
    #[serde(with = "crate::matrix")]
    pub delta_in: DMatrix<f64>,
    /// Summed recurrent-weight deltas of the run.
    #[serde(with = "crate::matrix")]
    pub delta_rec: DMatrix<f64>,
    #[serde(skip)]
    pub traces: Option<TraceHistory>,
}

impl TrainingRecord {
    pub fn mean_loss(&self) -> f64 {
        if self.losses.is_empty() {
            return 0.0;
        }
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }

    /// CSV loss curve: `step,loss,weight_change_norm`.
    pub fn write_loss_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "loss", "weight_change_norm"])?;
        for (t, (l, n)) in self.losses.iter().zip(&self.weight_change_norms).enumerate() {
            w.write_record([t.to_string(), l.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the network once over `inputs`, learning online to track `targets`.
///
/// Each step: LIF update, presynaptic trace update, pseudo-derivatives,
/// eligibility, readout, learning signal, weight update, loss.
pub fn train_online(
    inputs: &AnalogSignal,
    targets: &AnalogSignal,
    model: &NetworkModel,
    opts: &TrainOptions,
) -> Result<TrainingRecord> {
    model.validate()?;
    if inputs.len() != targets.len() || (inputs.dt_ms() - targets.dt_ms()).abs() > 0.0 {
        return Err(contract(format!(
            "inputs ({} steps of {} ms) and targets ({} steps of {} ms) are not aligned",
            inputs.len(),
            inputs.dt_ms(),
            targets.len(),
            targets.dt_ms()
        )));
    }
    if (inputs.dt_ms() - model.dt_ms).abs() > 1e-12 * model.dt_ms {
        return Err(contract("input sampling step differs from model step"));
    }
    if inputs.channels() != model.n_in || targets.channels() != model.n_out {
        return Err(contract(format!(
            "model is {} in / {} out, signals carry {} / {} channels",
            model.n_in,
            model.n_out,
            inputs.channels(),
            targets.channels()
        )));
    }
    if !(opts.eta >= 0.0) || opts.eta_readout.is_some_and(|e| !(e >= 0.0)) {
        return Err(domain("learning rates must be non-negative"));
    }
    check_alpha(model.kappa)?;

    let initial = model.clone();
    let mut net = model.clone();
    let alphas = net.alphas()?;
    let mut state = LifState::zeros(net.n_rec);
    let mut zbar_rec = EligibilityState::new(net.n_rec, opts.tau_pre_ms, net.dt_ms)?;
    let mut zbar_in = EligibilityState::new(net.n_in, opts.tau_pre_ms, net.dt_ms)?;
    // dy/dW_out follows the readout leak, not tau_pre.
    let mut zhat = vec![0.0; net.n_rec];
    let mut bias_trace = 0.0;
    let eta_out = opts.eta_readout.unwrap_or(opts.eta);

    let steps = inputs.len();
    let mut y = vec![0.0; net.n_out];
    let mut outputs = DMatrix::zeros(net.n_out, steps);
    let mut losses = Vec::with_capacity(steps);
    let mut norms = Vec::with_capacity(steps);
    let mut delta_in = DMatrix::zeros(net.n_rec, net.n_in);
    let mut delta_rec = DMatrix::zeros(net.n_rec, net.n_rec);
    let mut traces = opts.record_traces.then(TraceHistory::default);

    for t in 0..steps {
        let x = inputs.sample(t);
        let y_star = targets.sample(t);

        advance(&mut state, x, &net, &alphas)?;
        let z = &state.last_z;
        zbar_rec.push(z.iter().map(|&b| f64::from(u8::from(b))));
        zbar_in.push(x.iter().copied());
        let psi = pseudo_derivatives(&state, &net)?;
        let e_rec = eligibility_matrix(&psi, &zbar_rec.zbar, Projection::Recurrent);
        let e_in = eligibility_matrix(&psi, &zbar_in.zbar, Projection::Input);

        y = readout_step(&y, z, &net)?;
        let l = learning_signal(&y, y_star, &net.feedback)?;

        let d_in = if opts.train_input {
            online_update(&net.w_in, Projection::Input, opts.eta, &l, &e_in)?
        } else {
            DMatrix::zeros(net.n_rec, net.n_in)
        };
        let d_rec = if opts.train_recurrent {
            online_update(&net.w_rec, Projection::Recurrent, opts.eta, &l, &e_rec)?
        } else {
            DMatrix::zeros(net.n_rec, net.n_rec)
        };
        delta_in += &d_in;
        delta_rec += &d_rec;
        if opts.mode == UpdateMode::Online {
            net.w_in += &d_in;
            net.w_rec += &d_rec;
        }

        let err: Vec<f64> = y.iter().zip(y_star).map(|(a, b)| a - b).collect();
        if opts.train_readout {
            for (zh, &zj) in zhat.iter_mut().zip(z.iter()) {
                *zh = net.kappa * *zh + f64::from(u8::from(zj));
            }
            bias_trace = net.kappa * bias_trace + 1.0;
            for (k, &e) in err.iter().enumerate() {
                for (j, &zh) in zhat.iter().enumerate() {
                    net.w_out[(k, j)] -= eta_out * e * zh;
                }
                net.b_out[k] -= eta_out * e * bias_trace;
            }
        }

        for (k, v) in y.iter().enumerate() {
            outputs[(k, t)] = *v;
        }
        losses.push(err.iter().map(|e| e * e).sum::<f64>() / err.len().max(1) as f64);

        let change = if opts.mode == UpdateMode::Online {
            (&net.w_in - &initial.w_in).norm_squared()
                + (&net.w_rec - &initial.w_rec).norm_squared()
                + (&net.w_out - &initial.w_out).norm_squared()
        } else {
            delta_in.norm_squared() + delta_rec.norm_squared() + (&net.w_out - &initial.w_out).norm_squared()
        };
        norms.push(change.sqrt());

        let norm = net.w_in.norm().max(net.w_rec.norm()).max(net.w_out.norm());
        if !(norm <= opts.weight_bound) {
            return Err(Error::TrainingDiverged {
                step: t,
                norm,
                bound: opts.weight_bound,
            });
        }

        if let Some(tr) = traces.as_mut() {
            tr.learning_signals.push(l);
            tr.e_in.push(e_in);
            tr.e_rec.push(e_rec);
        }
    }

    if opts.mode == UpdateMode::Accumulate {
        net.w_in += &delta_in;
        net.w_rec += &delta_rec;
    }

    Ok(TrainingRecord {
        losses,
        outputs,
        weight_change_norms: norms,
        options: opts.clone(),
        final_model: net,
        delta_in,
        delta_rec,
        traces,
    })
}

/// Repeated passes over the same sequence, each starting from a silent network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochHistory {
    pub epoch_losses: Vec<f64>,
    pub final_model: NetworkModel,
    pub last_epoch: TrainingRecord,
}

pub fn train_epochs(
    inputs: &AnalogSignal,
    targets: &AnalogSignal,
    model: &NetworkModel,
    opts: &TrainOptions,
    epochs: usize,
) -> Result<EpochHistory> {
    if epochs == 0 {
        return Err(domain("at least one epoch is required"));
    }
    let mut current = model.clone();
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut last = None;
    for _ in 0..epochs {
        let rec = train_online(inputs, targets, &current, opts)?;
        epoch_losses.push(rec.mean_loss());
        current = rec.final_model.clone();
        last = Some(rec);
    }
    Ok(EpochHistory {
        epoch_losses,
        final_model: current,
        last_epoch: last.expect("epochs >= 1"),
    })
}

/// Seeded toy task: frozen Poisson input spikes, sinusoidal target.
pub mod toy {
    use super::*;
    use crate::rng::RandomSource;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    pub struct SineTask {
        pub n_in: usize,
        pub steps: usize,
        pub dt_ms: f64,
        pub input_rate_hz: f64,
        pub period_ms: f64,
        pub amplitude: f64,
    }

    impl Default for SineTask {
        fn default() -> Self {
            Self {
                n_in: 20,
                steps: 2000,
                dt_ms: 1.0,
                input_rate_hz: 20.0,
                period_ms: 500.0,
                amplitude: 1.0,
            }
        }
    }

    impl SineTask {
        /// `(inputs, targets)`; the inputs are a frozen spike pattern drawn from `rng`.
        pub fn generate(&self, rng: &mut RandomSource) -> Result<(AnalogSignal, AnalogSignal)> {
            let p = self.input_rate_hz * self.dt_ms / 1000.0;
            if !(0.0..=1.0).contains(&p) {
                return Err(domain(format!("input spike probability {p} outside [0, 1]")));
            }
            let rows = (0..self.steps)
                .map(|_| (0..self.n_in).map(|_| f64::from(u8::from(rng.bernoulli(p)))).collect())
                .collect();
            let inputs = AnalogSignal::from_rows(rows, self.dt_ms)?;
            let target = (0..self.steps)
                .map(|t| {
                    let time = t as f64 * self.dt_ms;
                    self.amplitude * (std::f64::consts::TAU * time / self.period_ms).sin()
                })
                .collect();
            Ok((inputs, AnalogSignal::mono(target, self.dt_ms)?))
        }
    }
}
