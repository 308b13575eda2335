//! Experiment bodies. Each runs entirely in memory and returns its metrics
//! and the bytes of every artifact; nothing touches the filesystem here.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use tslab_core::dde::{integrate_dde, map_orbit, DdeSystem};
use tslab_core::eprop::{batch_gradient, toy::SineTask, train_epochs, train_online, TrainOptions, UpdateMode};
use tslab_core::lif::{run_network, NetworkConfig};
use tslab_core::memcap::{build_esn, memory_capacity, EsnConfig, EsnModel, McReport, McSettings, Nonlinearity};
use tslab_core::ode::StepControl;
use tslab_core::slowfast::{
    critical_manifold, integrate_full, integrate_reduced, manifold_gap, reparameterize, write_manifold_csv,
    ReducedOptions, RootWindow, SlowFastSystem, TimeFrame, Trajectory,
};
use tslab_core::timescale::{band_lookup, check_budget, forgetting_factor_of, TimescaleBudget, Verdict};
use tslab_core::{decay_factor, AnalogSignal, Error, RandomSource, Result};

use crate::config::{
    BudgetParams, DdeParams, EpropParams, ExperimentConfig, McSweepParams, Parameters, ReservoirActivation,
    SlowfastParams, Testbed,
};

/// Result of one experiment before it is written anywhere.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub details: Value,
    /// `(file name, contents)` in emission order.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn flag(&mut self, name: &str, value: bool) {
        self.metric(name, if value { 1.0 } else { 0.0 });
    }

    fn artifact(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.push((name.into(), bytes));
    }

    pub fn artifact_bytes(&self, name: &str) -> Option<&[u8]> {
        self.artifacts.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

fn table<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn with_writer(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Dispatches on the experiment kind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    match &config.parameters {
        Parameters::EpropTrain(p) => eprop_train(p, config.seed),
        Parameters::McSweep(p) => mc_sweep(p, config.seed),
        Parameters::BudgetCheck(p) => budget_check(p),
        Parameters::SlowfastStudy(p) => slowfast_study(p),
        Parameters::DdeStudy(p) => dde_study(p),
    }
}

fn window_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn eprop_train(p: &EpropParams, seed: u64) -> Result<Outcome> {
    let mut rng = RandomSource::new(seed);
    let task = SineTask {
        n_in: p.n_in,
        steps: p.steps,
        dt_ms: p.dt_ms,
        input_rate_hz: p.input_rate_hz,
        period_ms: p.period_ms,
        amplitude: p.amplitude,
    };
    let (inputs, targets) = task.generate(&mut rng)?;
    let net = NetworkConfig {
        n_in: p.n_in,
        n_rec: p.n_rec,
        n_out: 1,
        dt_ms: p.dt_ms,
        tau_m_ms: p.tau_m_ms,
        v_th: p.v_th,
        gamma_pd: p.gamma_pd,
        refractory_steps: p.refractory_steps,
        kappa: None,
        input_gain: p.input_gain,
        recurrent_gain: p.recurrent_gain,
        output_gain: p.output_gain,
    }
    .build(&mut rng)?;
    let opts = TrainOptions {
        eta: p.eta,
        tau_pre_ms: p.tau_pre_ms,
        mode: UpdateMode::Online,
        train_input: true,
        train_recurrent: true,
        train_readout: p.train_readout,
        eta_readout: Some(p.eta_readout),
        weight_bound: p.weight_bound,
        record_traces: false,
    };

    let before = run_network(&inputs, &net, &vec![0.0; p.n_rec])?;
    let hist = train_epochs(&inputs, &targets, &net, &opts, p.epochs)?;
    let after = run_network(&inputs, &hist.final_model, &vec![0.0; p.n_rec])?;
    let rate = |spikes: usize| spikes as f64 / (p.n_rec * p.steps) as f64 / (p.dt_ms * 1e-3);

    let mut out = Outcome::default();
    let w = 5.min(p.epochs);
    let first = window_mean(&hist.epoch_losses[..w]);
    let last = window_mean(&hist.epoch_losses[p.epochs - w..]);
    out.metric("first_window_loss", first);
    out.metric("last_window_loss", last);
    out.metric("loss_ratio", last / first);
    out.metric("window_epochs", w as f64);
    out.metric("final_epoch_loss", *hist.epoch_losses.last().expect("epochs >= 1"));
    out.metric("rate_before_hz", rate(before.raster.spike_count()));
    out.metric("rate_after_hz", rate(after.raster.spike_count()));
    out.flag("learning_progress", last < 0.5 * first);

    out.artifact(
        "epoch_losses.csv",
        table(
            &["epoch", "mean_loss"],
            hist.epoch_losses.iter().enumerate().map(|(e, l)| [e.to_string(), l.to_string()]),
        )?,
    );
    out.artifact(
        "last_epoch_loss.csv",
        with_writer(|b| hist.last_epoch.write_loss_csv(b))?,
    );
    let outputs = &hist.last_epoch.outputs;
    out.artifact(
        "last_epoch_output.csv",
        table(
            &["step", "target", "output"],
            (0..targets.len()).map(|t| [t.to_string(), targets.sample(t)[0].to_string(), outputs[(0, t)].to_string()]),
        )?,
    );
    out.artifact("final_model.json", json_bytes(&hist.final_model)?);
    out.details = json!({ "epoch_losses": hist.epoch_losses });
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct McEntry {
    pub n: usize,
    pub reservoir: usize,
    pub kind: &'static str,
    pub spectral_radius: f64,
    pub report: McReport,
}

pub fn mc_sweep(p: &McSweepParams, seed: u64) -> Result<Outcome> {
    let base = RandomSource::new(seed);
    let mut entries = Vec::new();
    let mut stream = 0u64;
    for &n in &p.sizes {
        let settings = McSettings {
            d_max: p.d_max.unwrap_or(2 * n),
            input_length: p.input_length,
            washout: p.washout,
            ridge: p.ridge,
            ..Default::default()
        };
        let cfg = EsnConfig {
            n,
            spectral_radius: p.spectral_radius,
            leak_c_ms: p.leak_c_ms,
            dt_ms: 1.0,
            input_scale: p.input_scale,
            nonlinearity: match p.activation {
                ReservoirActivation::Tanh => Nonlinearity::Tanh,
                ReservoirActivation::Identity => Nonlinearity::Identity,
            },
        };
        for r in 0..p.reservoirs {
            let mut rng = base.substream(stream);
            stream += 1;
            let esn = build_esn(&cfg, &mut rng)?;
            let report = memory_capacity(&esn, &settings, &mut rng)?;
            entries.push(McEntry {
                n,
                reservoir: r,
                kind: "esn",
                spectral_radius: esn.spectral_radius,
                report,
            });
        }
        if p.shift_register {
            let mut rng = base.substream(stream);
            stream += 1;
            let line = EsnModel::shift_register(n, 1.0)?;
            let report = memory_capacity(&line, &settings, &mut rng)?;
            entries.push(McEntry {
                n,
                reservoir: 0,
                kind: "shift_register",
                spectral_radius: line.spectral_radius,
                report,
            });
        }
    }

    let mut out = Outcome::default();
    let esn = || entries.iter().filter(|e| e.kind == "esn");
    let shift = || entries.iter().filter(|e| e.kind == "shift_register");
    let max_excess = esn()
        .map(|e| e.report.mc_total - e.n as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    out.metric("reservoirs", esn().count() as f64);
    if esn().count() > 0 {
        out.metric("max_excess_over_n", max_excess);
        out.flag("all_within_bound", esn().all(|e| e.report.within_bound));
    }
    if shift().count() > 0 {
        let dev = shift()
            .map(|e| (e.report.mc_total - e.n as f64).abs())
            .fold(0.0, f64::max);
        out.metric("shift_register_max_deviation", dev);
    }
    for &n in &p.sizes {
        let totals: Vec<f64> = esn().filter(|e| e.n == n).map(|e| e.report.mc_total).collect();
        if !totals.is_empty() {
            out.metric(&format!("mean_mc_n{n}"), window_mean(&totals));
        }
    }

    out.artifact(
        "mc_summary.csv",
        table(
            &["n", "reservoir", "kind", "spectral_radius", "mc_total", "within_bound"],
            entries.iter().map(|e| {
                [
                    e.n.to_string(),
                    e.reservoir.to_string(),
                    e.kind.to_string(),
                    e.spectral_radius.to_string(),
                    e.report.mc_total.to_string(),
                    e.report.within_bound.to_string(),
                ]
            }),
        )?,
    );
    out.artifact(
        "mc_curves.csv",
        table(
            &["n", "reservoir", "kind", "delay", "score"],
            entries.iter().flat_map(|e| {
                e.report.per_delay.iter().map(move |s| {
                    vec![
                        e.n.to_string(),
                        e.reservoir.to_string(),
                        e.kind.to_string(),
                        s.delay.to_string(),
                        s.score.to_string(),
                    ]
                })
            }),
        )?,
    );
    out.details = json!({ "reports": entries });
    Ok(out)
}

pub fn budget_check(p: &BudgetParams) -> Result<Outcome> {
    let budget = TimescaleBudget::new(p.t_star_ms, p.forgetting_factor, p.tau_pre_ms, p.tau_m_ms)?;
    let report = check_budget(&budget)?;
    let tau_min = report.constraints[0].tau_min;
    let mut out = Outcome::default();
    out.metric("alpha_m", decay_factor(p.tau_m_ms, p.dt_ms)?);
    out.metric("alpha_pre", decay_factor(p.tau_pre_ms, p.dt_ms)?);
    out.metric("tau_min_ms", tau_min);
    out.metric("tau_min_over_t_star", tau_min / p.t_star_ms);
    for c in &report.constraints {
        out.metric(&format!("margin_{}_ms", c.constraint), c.margin);
        out.flag(&format!("pass_{}", c.constraint), c.verdict == Verdict::Pass);
    }
    out.flag("all_pass", report.all_pass());

    out.artifact(
        "budget.csv",
        table(
            &["constraint", "tau_ms", "tau_min_ms", "margin_ms", "ratio", "verdict"],
            report.constraints.iter().map(|c| {
                [
                    c.constraint.clone(),
                    c.tau.to_string(),
                    c.tau_min.to_string(),
                    c.margin.to_string(),
                    c.ratio.to_string(),
                    match c.verdict {
                        Verdict::Pass => "pass".to_string(),
                        Verdict::Fail => "fail".to_string(),
                    },
                ]
            }),
        )?,
    );
    // residual weight of an input `lag` in the past, out to twice the task horizon
    let rows = (0..=100)
        .map(|k| {
            let lag = p.t_star_ms * k as f64 / 50.0;
            let pre = if lag == 0.0 { Ok(1.0) } else { forgetting_factor_of(p.tau_pre_ms, lag) }?;
            let m = if lag == 0.0 { Ok(1.0) } else { forgetting_factor_of(p.tau_m_ms, lag) }?;
            Ok(vec![lag.to_string(), pre.to_string(), m.to_string(), p.forgetting_factor.to_string()])
        })
        .collect::<Result<Vec<_>>>()?;
    out.artifact(
        "forgetting_curve.csv",
        table(&["lag_ms", "forgetting_pre", "forgetting_m", "threshold"], rows)?,
    );
    let bands: Vec<String> = band_lookup(p.t_star_ms).into_iter().map(|b| b.name).collect();
    out.details = json!({ "report": report, "bands_containing_t_star": bands });
    Ok(out)
}

fn testbed(t: &Testbed, eps: f64) -> Result<SlowFastSystem> {
    match *t {
        Testbed::Linear => SlowFastSystem::with_epsilon(|x, y| y - x, |_, y| -y, eps),
        Testbed::Cubic { a } => SlowFastSystem::with_epsilon(|x, y| y - (x * x * x / 3.0 - x), move |x, _| a - x, eps),
    }
}

fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    with_writer(|b| traj.write_csv(b))
}

pub fn slowfast_study(p: &SlowfastParams) -> Result<Outcome> {
    if p.epsilons.is_empty() {
        return Err(Error::Domain("at least one epsilon is required".into()));
    }
    let window = RootWindow::default();
    let ctl = StepControl {
        tol: p.tol,
        ..Default::default()
    };
    let mut out = Outcome::default();
    let mut gaps = Vec::new();
    let mut frame_diffs = Vec::new();
    for (k, &eps) in p.epsilons.iter().enumerate() {
        let sys = testbed(&p.testbed, eps)?;
        let traj = integrate_full(&sys, p.x0, p.y0, p.horizon, TimeFrame::Slow, &ctl)?;
        gaps.push(manifold_gap(&sys, &traj, p.transient_factor * eps, &window)?);
        out.artifact(format!("trajectory_{k}.csv"), trajectory_csv(&traj)?);
        out.artifact(format!("trajectory_{k}.json"), json_bytes(&traj.sidecar())?);

        let slow = StepControl {
            sample_every: Some(p.frame_spacing),
            ..ctl.clone()
        };
        let fast = StepControl {
            sample_every: Some(p.frame_spacing / eps),
            ..ctl.clone()
        };
        let a = integrate_full(&sys, p.x0, p.y0, p.horizon, TimeFrame::Slow, &slow)?;
        let b = reparameterize(
            &integrate_full(&sys, p.x0, p.y0, p.horizon / eps, TimeFrame::Fast, &fast)?,
            TimeFrame::Slow,
        );
        if a.len() != b.len() {
            return Err(Error::Contract(format!(
                "frame grids differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let diff = a
            .points
            .iter()
            .zip(&b.points)
            .map(|(u, v)| (u.0 - v.0).abs().max((u.1 - v.1).abs()))
            .fold(0.0, f64::max);
        frame_diffs.push(diff);
    }

    let mut ratio_rows = Vec::new();
    let mut order_ok = true;
    let mut worst: f64 = 0.0;
    for k in 0..gaps.len() {
        let (ratio, expected) = if k == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (gaps[k] / gaps[k - 1], p.epsilons[k] / p.epsilons[k - 1])
        };
        if k > 0 {
            let dev = (ratio - expected).abs();
            worst = worst.max(dev);
            order_ok &= dev <= p.ratio_tolerance;
        }
        ratio_rows.push(vec![
            p.epsilons[k].to_string(),
            gaps[k].to_string(),
            ratio.to_string(),
            expected.to_string(),
            frame_diffs[k].to_string(),
        ]);
    }
    let frame_max = frame_diffs.iter().copied().fold(0.0, f64::max);
    out.metric("max_ratio_deviation", worst);
    out.flag("order_check_pass", order_ok && gaps.len() > 1);
    out.metric("frame_max_diff", frame_max);
    out.metric("frame_tolerance", 10.0 * p.tol);
    out.flag("frame_check_pass", frame_max <= 10.0 * p.tol);
    out.artifact(
        "gap_vs_epsilon.csv",
        table(&["epsilon", "gap", "ratio", "expected_ratio", "frame_diff"], ratio_rows)?,
    );

    let sys = testbed(&p.testbed, p.epsilons[0])?;
    let manifold = critical_manifold(&sys, p.manifold_y_lo, p.manifold_y_hi, p.manifold_samples, &window)?;
    out.artifact("manifold.csv", with_writer(|b| write_manifold_csv(&manifold, b))?);
    let reduced = integrate_reduced(&sys, p.y0, p.horizon, p.x0, &ReducedOptions::default());
    let fold = match reduced {
        Ok(traj) => {
            out.artifact("reduced.csv", trajectory_csv(&traj)?);
            Value::Null
        }
        Err(Error::ManifoldFold { x, y, time }) => {
            out.metric("reduced_fold_time", time);
            json!({ "x": x, "y": y, "time": time })
        }
        Err(e) => return Err(e),
    };
    out.details = json!({ "epsilons": p.epsilons, "gaps": gaps, "frame_diffs": frame_diffs, "reduced_fold": fold });
    Ok(out)
}

pub fn dde_study(p: &DdeParams) -> Result<Outcome> {
    if p.samples_per_delay == 0 || p.intervals == 0 {
        return Err(Error::Domain("intervals and samples_per_delay must be positive".into()));
    }
    let fb = p.feedback.clone();
    let history = p.history;
    let dde = DdeSystem::normalized(p.epsilon, move |x| fb.eval(x), move |_| history)?;
    let ctl = StepControl {
        tol: p.tol,
        sample_every: Some(1.0 / p.samples_per_delay as f64),
        ..Default::default()
    };
    let traj = integrate_dde(&dde, p.intervals as f64, &ctl)?;
    let orbit = map_orbit(&dde, p.history, p.intervals);
    let rows: Vec<[f64; 3]> = (0..=p.intervals)
        .map(|n| {
            let x = traj.points[n * p.samples_per_delay].0;
            [x, orbit[n], (x - orbit[n]).abs()]
        })
        .collect();
    let max_err = rows.iter().map(|r| r[2]).fold(0.0, f64::max);

    let mut out = Outcome::default();
    out.metric("epsilon", p.epsilon);
    out.metric("max_map_error", max_err);
    out.artifact(
        "dde_trajectory.csv",
        table(
            &["time", "x", "x_delayed"],
            traj.times
                .iter()
                .zip(&traj.points)
                .map(|(t, (x, xd))| [t.to_string(), x.to_string(), xd.to_string()]),
        )?,
    );
    out.artifact(
        "map_comparison.csv",
        table(
            &["n", "x_dde", "x_map", "abs_error"],
            rows.iter()
                .enumerate()
                .map(|(n, r)| [n.to_string(), r[0].to_string(), r[1].to_string(), r[2].to_string()]),
        )?,
    );
    out.details = json!({ "orbit": orbit });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationCheck {
    pub rel_err_rec: f64,
    pub rel_err_in: f64,
    pub gradient_norm: f64,
}

/// Runs e-prop with frozen weights and compares the summed online deltas with
/// `-eta` times the batch gradient built from the recorded traces.
pub fn factorization_check(seed: u64, n_rec: usize, steps: usize, eta: f64) -> Result<FactorizationCheck> {
    let mut rng = RandomSource::new(seed);
    let (n_in, n_out) = (5, 2);
    let model = NetworkConfig {
        n_in,
        n_rec,
        n_out,
        input_gain: 3.0,
        ..Default::default()
    }
    .build(&mut rng)?;
    let mut noise = |channels: usize| {
        let rows = (0..steps)
            .map(|_| (0..channels).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        AnalogSignal::from_rows(rows, model.dt_ms)
    };
    let x = noise(n_in)?;
    let y = noise(n_out)?;
    let opts = TrainOptions {
        eta,
        mode: UpdateMode::Accumulate,
        record_traces: true,
        ..Default::default()
    };
    let rec = train_online(&x, &y, &model, &opts)?;
    let tr = rec.traces.as_ref().expect("traces were requested");
    let g_rec = batch_gradient(&tr.learning_signals, &tr.e_rec)?;
    let g_in = batch_gradient(&tr.learning_signals, &tr.e_in)?;
    let rel = |a: &DMatrix<f64>, g: &DMatrix<f64>| {
        let b = -eta * g;
        (a - &b).norm() / b.norm().max(f64::MIN_POSITIVE)
    };
    Ok(FactorizationCheck {
        rel_err_rec: rel(&rec.delta_rec, &g_rec),
        rel_err_in: rel(&rec.delta_in, &g_in),
        gradient_norm: g_rec.norm() + g_in.norm(),
    })
}
