//! Embedded Dormand-Prince 5(4) integrator for small fixed-size systems.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Step-size control shared by the slow-fast and delay integrators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    /// Local error bound per step (mixed absolute/relative).
    pub tol: f64,
    /// Smallest admissible step before the problem is declared too stiff.
    pub h_min: f64,
    /// Largest step; `None` means the whole horizon.
    pub h_max: Option<f64>,
    /// Step budget; exhausting it is reported as a stiffness failure.
    pub max_steps: usize,
    /// Record only at multiples of this spacing (and at the horizon).
    pub sample_every: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            h_min: 1e-12,
            h_max: None,
            max_steps: 2_000_000,
            sample_every: None,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Accepted (or sampled) times and states.
pub type Solution<const N: usize> = (Vec<f64>, Vec<[f64; N]>);

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t_end`.
///
/// `guard` sees every accepted state and may abort (divergence checks).
pub fn integrate<const N: usize, F, G>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    mut guard: G,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N]) -> Result<()>,
{
    if !(t_end > t0) {
        return Err(domain(format!("horizon must be positive, got [{t0}, {t_end}]")));
    }
    if !(ctl.tol > 0.0) {
        return Err(domain("step tolerance must be positive"));
    }
    let span = t_end - t0;
    let h_max = ctl.h_max.unwrap_or(span).min(span);
    let sample = match ctl.sample_every {
        Some(dt) if dt > 0.0 => Some(dt),
        Some(dt) => return Err(domain(format!("sample spacing must be positive, got {dt}"))),
        None => None,
    };

    let mut times = vec![t0];
    let mut states = vec![y0];
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    let mut h = initial_step(&y, &k1, ctl.tol, h_max);
    let mut next_sample_idx = 1u64;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(Error::StiffFailure { time: t, step: h });
        }
        // land exactly on the next sample time or the horizon
        let mut target = t_end;
        if let Some(dt) = sample {
            target = target.min(t0 + next_sample_idx as f64 * dt);
        }
        let mut landing = false;
        if t + h >= target - 1e-12 * span.max(1.0) {
            h = target - t;
            landing = true;
        }
        if h < ctl.h_min {
            if !landing {
                return Err(Error::StiffFailure { time: t, step: h });
            }
            // target coincides with t up to rounding
            t = target;
            if sample.is_some() {
                times.push(t);
                states.push(y);
                next_sample_idx += 1;
            }
            h = h_max.min(ctl.h_min.max(1e-6 * span));
            continue;
        }

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                for (r, kr) in k.iter().enumerate().take(s) {
                    *v += h * A[s][r] * kr[i];
                }
            }
            k[s] = rhs(t + C[s] * h, &ys)?;
        }
        let mut y_new = y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut incr = 0.0;
            let mut e = 0.0;
            for s in 0..6 {
                incr += A[6][s] * k[s][i];
            }
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            y_new[i] = y[i] + h * incr;
            let scale = ctl.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((h * e).abs() / scale);
        }
        steps += 1;

        if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
            t = if landing { target } else { t + h };
            y = y_new;
            k1 = k[6];
            guard(t, &y)?;
            let on_sample = sample.is_none() || (landing && t == target);
            if on_sample {
                times.push(t);
                states.push(y);
                if landing && sample.is_some() && target < t_end {
                    next_sample_idx += 1;
                }
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * grow).min(h_max);
        } else {
            // rejected: shrink at least by half
            let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            h *= shrink;
            if h < ctl.h_min {
                return Err(Error::StiffFailure { time: t, step: h });
            }
        }
    }
    Ok((times, states))
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], tol: f64, h_max: f64) -> f64 {
    let rate = y
        .iter()
        .zip(dy)
        .map(|(v, d)| d.abs() / (1.0 + v.abs()))
        .fold(0.0, f64::max);
    let h = if rate > 0.0 { 0.1 * tol.powf(0.2) / rate } else { h_max };
    h.min(h_max).max(1e-6 * h_max)
}
