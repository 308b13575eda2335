//! Short-term memory capacity of input-driven reservoirs.
//!
//! A reservoir is driven by i.i.d. uniform noise `u(t)`. For each delay `d` a
//! linear readout (ridge regression with intercept) is trained to reconstruct
//! `u(t-d)` from the reservoir state, and the squared correlation between
//! prediction and target on held-out data is the delay score. The capacity is
//! the sum of the scores over `d = 1..=d_max` and cannot exceed the number of
//! state variables.
//!
//! State convention: row `t` of a state matrix is the reservoir state after the
//! inputs `u(0), ..., u(t-1)` have been consumed, so `u(t-1)` is the most recent
//! input visible at row `t`, and `d = 0` is not recoverable from the state alone.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::lif::{advance, LifState, NetworkModel};
use crate::rng::RandomSource;
use crate::signal::{decay_factor, white_noise, AnalogSignal};

/// Slack allowed on the `mc_total <= n` bound.
pub const MC_BOUND_SLACK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    Identity,
}

impl Nonlinearity {
    #[inline]
    fn apply(self, a: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => a.tanh(),
            Nonlinearity::Identity => a,
        }
    }
}

/// Leaky-integrator echo state network, Euler-discretised:
/// `x' = (1 - dt/c) x + (dt/c) f(W x + w_in u + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnModel {
    pub n: usize,
    #[serde(with = "crate::matrix")]
    pub w: DMatrix<f64>,
    pub w_in: Vec<f64>,
    pub bias: f64,
    pub leak_c_ms: f64,
    pub dt_ms: f64,
    pub nonlinearity: Nonlinearity,
    /// Spectral radius of `w` as measured after construction.
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsnConfig {
    pub n: usize,
    pub spectral_radius: f64,
    pub leak_c_ms: f64,
    pub dt_ms: f64,
    pub input_scale: f64,
    pub nonlinearity: Nonlinearity,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            n: 20,
            spectral_radius: 0.9,
            leak_c_ms: 1.0,
            dt_ms: 1.0,
            input_scale: 1.0,
            nonlinearity: Nonlinearity::Tanh,
        }
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(w: &DMatrix<f64>) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Dense Gaussian reservoir rescaled to the requested spectral radius.
pub fn build_esn(cfg: &EsnConfig, rng: &mut RandomSource) -> Result<EsnModel> {
    if cfg.n == 0 {
        return Err(domain("reservoir size must be at least 1"));
    }
    if !(cfg.spectral_radius > 0.0) || !(cfg.leak_c_ms > 0.0) || !(cfg.dt_ms > 0.0) {
        return Err(domain("spectral radius, leak constant and dt must be positive"));
    }
    let n = cfg.n;
    let raw = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let rho = spectral_radius(&raw);
    if !(rho > 0.0) {
        return Err(domain("random reservoir matrix is nilpotent; choose another seed"));
    }
    let w = raw * (cfg.spectral_radius / rho);
    let w_in = (0..n).map(|_| cfg.input_scale * rng.uniform(-1.0, 1.0)).collect();
    let measured = spectral_radius(&w);
    Ok(EsnModel {
        n,
        w,
        w_in,
        bias: 0.0,
        leak_c_ms: cfg.leak_c_ms,
        dt_ms: cfg.dt_ms,
        nonlinearity: cfg.nonlinearity,
        spectral_radius: measured,
    })
}

impl EsnModel {
    /// Linear delay line: unit 0 receives the input, unit `k` copies unit `k-1`.
    pub fn shift_register(n: usize, dt_ms: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("reservoir size must be at least 1"));
        }
        let w = DMatrix::from_fn(n, n, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        let mut w_in = vec![0.0; n];
        w_in[0] = 1.0;
        Ok(Self {
            n,
            w,
            w_in,
            bias: 0.0,
            leak_c_ms: dt_ms,
            dt_ms,
            nonlinearity: Nonlinearity::Identity,
            spectral_radius: 0.0,
        })
    }

    /// One Euler step of the leaky-integrator dynamics.
    pub fn step(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        let h = self.dt_ms / self.leak_c_ms;
        let mut pre = &self.w * x;
        for (p, w) in pre.iter_mut().zip(&self.w_in) {
            *p += w * u + self.bias;
        }
        DVector::from_fn(self.n, |i, _| (1.0 - h) * x[i] + h * self.nonlinearity.apply(pre[i]))
    }
}

/// A dynamical system that can be probed for memory capacity.
pub trait Reservoir {
    /// Number of state variables.
    fn size(&self) -> usize;

    fn dt_ms(&self) -> f64;

    /// `T x size` state matrix; row `t` precedes the consumption of `u[t]`.
    fn collect_states(&self, u: &[f64]) -> Result<DMatrix<f64>>;
}

impl Reservoir for EsnModel {
    fn size(&self) -> usize {
        self.n
    }

    fn dt_ms(&self) -> f64 {
        self.dt_ms
    }

    fn collect_states(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let mut states = DMatrix::zeros(u.len(), self.n);
        let mut x = DVector::zeros(self.n);
        for (t, &ut) in u.iter().enumerate() {
            states.set_row(t, &x.transpose());
            x = self.step(&x, ut);
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    time: t as f64 * self.dt_ms,
                    value: x[i],
                });
            }
        }
        Ok(states)
    }
}

/// LIF network read out through exponentially filtered spike trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingReservoir {
    /// Must have a single input channel.
    pub model: NetworkModel,
    pub tau_state_ms: f64,
}

impl Reservoir for SpikingReservoir {
    fn size(&self) -> usize {
        self.model.n_rec
    }

    fn dt_ms(&self) -> f64 {
        self.model.dt_ms
    }

    fn collect_states(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.model.validate()?;
        if self.model.n_in != 1 {
            return Err(contract("spiking reservoir needs exactly one input channel"));
        }
        let alpha = decay_factor(self.tau_state_ms, self.model.dt_ms)?;
        let alphas = self.model.alphas()?;
        let n = self.model.n_rec;
        let mut state = LifState::zeros(n);
        let mut trace = vec![0.0; n];
        let mut states = DMatrix::zeros(u.len(), n);
        for (t, &ut) in u.iter().enumerate() {
            for (j, v) in trace.iter().enumerate() {
                states[(t, j)] = *v;
            }
            advance(&mut state, &[ut], &self.model, &alphas)?;
            for (tr, &z) in trace.iter_mut().zip(&state.last_z) {
                *tr = alpha * *tr + f64::from(u8::from(z));
            }
        }
        Ok(states)
    }
}

/// Drives the reservoir with `input` and drops the first `washout` rows.
pub fn run_reservoir<R: Reservoir + ?Sized>(
    input: &AnalogSignal,
    reservoir: &R,
    washout: usize,
) -> Result<DMatrix<f64>> {
    if input.channels() != 1 {
        return Err(contract("reservoir input must be single-channel"));
    }
    if input.len() <= washout {
        return Err(contract(format!(
            "input of {} steps leaves nothing after a washout of {washout}",
            input.len()
        )));
    }
    if (input.dt_ms() - reservoir.dt_ms()).abs() > 1e-12 * reservoir.dt_ms() {
        return Err(contract("input sampling step differs from reservoir step"));
    }
    let states = reservoir.collect_states(&input.channel(0))?;
    Ok(states.rows(washout, states.nrows() - washout).into_owned())
}

/// Ridge regression with intercept on a fixed row window, split 50/50 into
/// a fitting half and a scoring half. The Gram matrix is factored once and
/// reused for every target.
struct DelayRegressor<'a> {
    states: &'a DMatrix<f64>,
    train: std::ops::Range<usize>,
    test: std::ops::Range<usize>,
    means: DVector<f64>,
    solver: Solver,
}

enum Solver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Svd(nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<'a> DelayRegressor<'a> {
    fn new(states: &'a DMatrix<f64>, first_row: usize, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(domain(format!("ridge must be non-negative, got {ridge}")));
        }
        let rows = states.nrows();
        if rows < first_row + 4 {
            return Err(contract(format!(
                "{rows} state rows leave too few usable steps after skipping {first_row}"
            )));
        }
        let mid = first_row + (rows - first_row) / 2;
        let train = first_row..mid;
        let test = mid..rows;
        let n = states.ncols();
        let block = states.rows(train.start, train.len());
        let means = DVector::from_fn(n, |j, _| block.column(j).mean());
        let mut centered = block.into_owned();
        for j in 0..n {
            let m = means[j];
            centered.column_mut(j).add_scalar_mut(-m);
        }
        let mut gram = centered.transpose() * &centered;
        for j in 0..n {
            gram[(j, j)] += ridge;
        }
        let solver = match gram.clone().cholesky() {
            Some(c) => Solver::Cholesky(c),
            None => Solver::Svd(gram.svd(true, true)),
        };
        Ok(Self {
            states,
            train,
            test,
            means,
            solver,
        })
    }

    /// Fits `target(row)` and returns `(weights, intercept, held-out squared correlation)`.
    fn fit<F: Fn(usize) -> f64>(&self, target: F, delay: usize) -> Result<(Vec<f64>, f64, f64)> {
        let n = self.states.ncols();
        let y_mean = self.train.clone().map(&target).sum::<f64>() / self.train.len() as f64;
        let mut rhs = DVector::zeros(n);
        let mut var = 0.0;
        for r in self.train.clone() {
            let yc = target(r) - y_mean;
            var += yc * yc;
            for j in 0..n {
                rhs[j] += (self.states[(r, j)] - self.means[j]) * yc;
            }
        }
        if !(var > 0.0) {
            return Err(Error::DegenerateTarget { delay });
        }
        let w = match &self.solver {
            Solver::Cholesky(c) => c.solve(&rhs),
            Solver::Svd(s) => s
                .solve(&rhs, 1e-12)
                .map_err(|e| domain(format!("readout solve failed: {e}")))?,
        };
        let intercept = y_mean - w.dot(&self.means);
        let pred: Vec<f64> = self
            .test
            .clone()
            .map(|r| intercept + (0..n).map(|j| w[j] * self.states[(r, j)]).sum::<f64>())
            .collect();
        let truth: Vec<f64> = self.test.clone().map(&target).collect();
        let score = squared_correlation(&pred, &truth).ok_or(Error::DegenerateTarget { delay })?;
        Ok((w.iter().copied().collect(), intercept, score))
    }
}

/// Squared Pearson correlation; `None` when `b` is constant, 0 when only `a` is.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(sbb > 0.0) {
        return None;
    }
    if !(saa > 0.0) {
        return Some(0.0);
    }
    Some((sab * sab / (saa * sbb)).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReadout {
    pub delay: usize,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub score: f64,
}

/// Trains a readout recovering `input[t - delay]` from `states` row `t`.
///
/// `states` and `input` are aligned row-for-sample; rows before `delay` are skipped.
pub fn train_delay_readout(
    states: &DMatrix<f64>,
    input: &[f64],
    delay: usize,
    ridge: f64,
) -> Result<DelayReadout> {
    if states.nrows() != input.len() {
        return Err(contract(format!(
            "{} state rows but {} input samples",
            states.nrows(),
            input.len()
        )));
    }
    if delay >= input.len() {
        return Err(contract(format!("delay {delay} exceeds the {} usable steps", input.len())));
    }
    let reg = DelayRegressor::new(states, delay, ridge)?;
    let (weights, intercept, score) = reg.fit(|r| input[r - delay], delay)?;
    Ok(DelayReadout {
        delay,
        weights,
        intercept,
        score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub d_max: usize,
    pub input_length: usize,
    pub washout: usize,
    pub ridge: f64,
    pub input_low: f64,
    pub input_high: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            d_max: 40,
            input_length: 10_000,
            washout: 200,
            ridge: 1e-8,
            input_low: -1.0,
            input_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayScore {
    pub delay: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub per_delay: Vec<DelayScore>,
    pub mc_total: f64,
    pub n: usize,
    pub washout: usize,
    pub input_length: usize,
    pub regularization: f64,
    /// `mc_total <= n + MC_BOUND_SLACK`.
    pub within_bound: bool,
}

impl McReport {
    /// Forgetting curve as `delay,score` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delay", "score"])?;
        for s in &self.per_delay {
            w.write_record([s.delay.to_string(), s.score.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Memory capacity `sum_{d=1..=d_max} score_d` on white-noise input drawn from `rng`.
pub fn memory_capacity<R: Reservoir + ?Sized>(
    reservoir: &R,
    settings: &McSettings,
    rng: &mut RandomSource,
) -> Result<McReport> {
    if settings.d_max == 0 {
        return Err(domain("d_max must be at least 1"));
    }
    let u = white_noise(
        settings.input_length,
        settings.input_low,
        settings.input_high,
        reservoir.dt_ms(),
        rng,
    )?;
    let states = run_reservoir(&u, reservoir, settings.washout)?;
    let input: Vec<f64> = u.channel(0)[settings.washout..].to_vec();
    scores_from_states(&states, &input, reservoir.size(), settings)
}

/// Capacity of a precomputed state matrix aligned with `input`.
pub fn scores_from_states(
    states: &DMatrix<f64>,
    input: &[f64],
    n: usize,
    settings: &McSettings,
) -> Result<McReport> {
    if states.nrows() != input.len() {
        return Err(contract("state rows and input samples differ in number"));
    }
    let reg = DelayRegressor::new(states, settings.d_max, settings.ridge)?;
    let per_delay = (1..=settings.d_max)
        .map(|d| {
            reg.fit(|r| input[r - d], d)
                .map(|(_, _, score)| DelayScore { delay: d, score })
        })
        .collect::<Result<Vec<_>>>()?;
    let mc_total = per_delay.iter().map(|s| s.score).sum::<f64>();
    Ok(McReport {
        per_delay,
        mc_total,
        n,
        washout: settings.washout,
        input_length: settings.input_length,
        regularization: settings.ridge,
        within_bound: mc_total <= n as f64 + MC_BOUND_SLACK,
    })
}
