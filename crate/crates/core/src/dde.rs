//! Scalar delay equation `tau_L x'(t) = -x(t) + F(x(t - tau_D))` by the method of steps.
//!
//! The solution is advanced one delay interval `[k tau_D, (k+1) tau_D]` at a
//! time. Inside an interval the delayed argument lies entirely in the already
//! computed past, which is read back by cubic Hermite interpolation of the
//! stored steps (values and one-sided derivatives of the interval they belong to).

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::ode::{integrate, StepControl};
use crate::slowfast::{TimeFrame, Trajectory, DIVERGENCE_BOUND};

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DdeSystem {
    pub tau_l_ms: f64,
    pub tau_d_ms: f64,
    feedback: ScalarMap,
    history: ScalarMap,
}

impl fmt::Debug for DdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DdeSystem")
            .field("tau_l_ms", &self.tau_l_ms)
            .field("tau_d_ms", &self.tau_d_ms)
            .finish_non_exhaustive()
    }
}

impl DdeSystem {
    /// `history` must be defined on `[-tau_d, 0]`.
    pub fn new<F, H>(tau_l_ms: f64, tau_d_ms: f64, feedback: F, history: H) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(tau_l_ms > 0.0) || !(tau_d_ms > 0.0) {
            return Err(domain(format!(
                "time scales must be positive, got tau_L = {tau_l_ms}, tau_D = {tau_d_ms}"
            )));
        }
        Ok(Self {
            tau_l_ms,
            tau_d_ms,
            feedback: Arc::new(feedback),
            history: Arc::new(history),
        })
    }

    /// Normalised form `eps x'(t) = -x(t) + F(x(t - 1))`, i.e. unit delay and `tau_L = eps`.
    pub fn normalized<F, H>(eps: f64, feedback: F, history: H) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(eps, 1.0, feedback, history)
    }

    pub fn epsilon(&self) -> f64 {
        self.tau_l_ms / self.tau_d_ms
    }

    pub fn feedback(&self, x: f64) -> f64 {
        (self.feedback)(x)
    }
}

/// Stored solution of one delay interval.
struct Segment {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

struct History<'a> {
    system: &'a DdeSystem,
    segments: Vec<Segment>,
}

impl History<'_> {
    fn value(&self, t: f64) -> Result<f64> {
        let tau_d = self.system.tau_d_ms;
        if t <= 0.0 {
            if t < -tau_d * (1.0 + 1e-12) {
                return Err(Error::HistoryGap { time: t });
            }
            let v = (self.system.history)(t);
            return if v.is_finite() { Ok(v) } else { Err(Error::HistoryGap { time: t }) };
        }
        let seg = self
            .segments
            .iter()
            .find(|s| t <= *s.times.last().unwrap_or(&f64::NEG_INFINITY))
            .ok_or(Error::HistoryGap { time: t })?;
        let i = match seg.times.partition_point(|&s| s <= t) {
            0 => return Err(Error::HistoryGap { time: t }),
            k if k >= seg.times.len() => seg.times.len() - 2,
            k => k - 1,
        };
        let (t0, t1) = (seg.times[i], seg.times[i + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        Ok(h00 * seg.values[i] + h10 * h * seg.slopes[i] + h01 * seg.values[i + 1] + h11 * h * seg.slopes[i + 1])
    }
}

/// Integrates over `[0, horizon]` ms. Trajectory points are `(x(t), x(t - tau_D))`.
pub fn integrate_dde(dde: &DdeSystem, horizon: f64, ctl: &StepControl) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    let tau_d = dde.tau_d_ms;
    let mut hist = History {
        system: dde,
        segments: Vec::new(),
    };
    let mut times = Vec::new();
    let mut points = Vec::new();
    let mut start = 0.0;
    let mut x = hist.value(0.0)?;
    let mut interval = 0usize;
    // steps never exceed one delay, so the delayed argument stays in stored history
    let inner = StepControl {
        h_max: Some(ctl.h_max.map_or(tau_d, |h| h.min(tau_d))),
        sample_every: None,
        ..ctl.clone()
    };
    while start < horizon * (1.0 - 1e-14) {
        let end = ((interval + 1) as f64 * tau_d).min(horizon);
        let past = &hist;
        let rhs = |t: f64, s: &[f64; 1]| -> Result<[f64; 1]> {
            let delayed = past.value(t - tau_d)?;
            Ok([(-s[0] + dde.feedback(delayed)) / dde.tau_l_ms])
        };
        let guard = |t: f64, s: &[f64; 1]| {
            if s[0].abs() > DIVERGENCE_BOUND {
                Err(Error::Divergence { time: t, value: s[0].abs() })
            } else {
                Ok(())
            }
        };
        let (ts, xs) = integrate(rhs, start, [x], end, &inner, guard)?;
        let mut seg = Segment {
            times: Vec::with_capacity(ts.len()),
            values: Vec::with_capacity(ts.len()),
            slopes: Vec::with_capacity(ts.len()),
        };
        for (t, s) in ts.iter().zip(&xs) {
            let delayed = hist.value(t - tau_d)?;
            seg.times.push(*t);
            seg.values.push(s[0]);
            seg.slopes.push((-s[0] + dde.feedback(delayed)) / dde.tau_l_ms);
        }
        x = *seg.values.last().expect("integrator returns the start point");
        start = end;
        interval += 1;
        hist.segments.push(seg);
    }

    let sample_times: Vec<f64> = match ctl.sample_every {
        Some(dt) if dt > 0.0 => {
            let count = (horizon / dt + 1e-9).floor() as usize;
            let mut v: Vec<f64> = (0..=count).map(|k| k as f64 * dt).collect();
            if horizon - v.last().copied().unwrap_or(0.0) > 1e-9 * dt {
                v.push(horizon);
            }
            v
        }
        Some(dt) => return Err(domain(format!("sample spacing must be positive, got {dt}"))),
        None => {
            let mut v = vec![0.0];
            for seg in &hist.segments {
                v.extend(seg.times.iter().skip(1).copied());
            }
            v
        }
    };
    for t in sample_times {
        let xt = if t == 0.0 { hist.value(0.0)? } else { hist.value(t)? };
        times.push(t);
        points.push((xt, hist.value(t - tau_d)?));
    }
    Ok(Trajectory {
        times,
        points,
        frame: TimeFrame::Original,
        tau1_ms: dde.tau_l_ms,
        tau2_ms: dde.tau_d_ms,
    })
}

/// Orbit `x_{n+1} = F(x_n)` of the singular limit, starting from `x_0`.
pub fn map_orbit(dde: &DdeSystem, x0: f64, steps: usize) -> Vec<f64> {
    let mut orbit = Vec::with_capacity(steps + 1);
    let mut x = x0;
    orbit.push(x);
    for _ in 0..steps {
        x = dde.feedback(x);
        orbit.push(x);
    }
    orbit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_feedback_decays_exponentially() {
        let dde = DdeSystem::new(2.0, 5.0, |_| 0.0, |_| 1.5).unwrap();
        let ctl = StepControl { tol: 1e-10, sample_every: Some(0.5), ..Default::default() };
        let tr = integrate_dde(&dde, 20.0, &ctl).unwrap();
        for (t, (x, _)) in tr.times.iter().zip(&tr.points) {
            assert!((x - 1.5 * (-t / 2.0).exp()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn identity_feedback_keeps_constant_history() {
        let dde = DdeSystem::new(1.0, 3.0, |x| x, |_| 0.7).unwrap();
        let tr = integrate_dde(&dde, 12.0, &StepControl::default()).unwrap();
        assert!(tr.points.iter().all(|(x, d)| (x - 0.7).abs() < 1e-12 && (d - 0.7).abs() < 1e-12));
    }

    #[test]
    fn history_is_used_on_first_interval() {
        // x' = -x + h(t - 1) with h(s) = s + 1 on [-1, 0]: exact solution x = t - 1 + 2 e^{-t} + ... check derivative at 0
        let dde = DdeSystem::new(1.0, 1.0, |x| x, |s| s + 1.0).unwrap();
        let ctl = StepControl { tol: 1e-11, sample_every: Some(0.25), ..Default::default() };
        let tr = integrate_dde(&dde, 1.0, &ctl).unwrap();
        // on [0,1]: x' = -x + t, x(0) = 1  =>  x = t - 1 + 2 e^{-t}
        for (t, (x, d)) in tr.times.iter().zip(&tr.points) {
            assert!((x - (t - 1.0 + 2.0 * (-t).exp())).abs() < 1e-8, "t = {t}");
            assert!((d - *t).abs() < 1e-12);
        }
    }

    #[test]
    fn second_interval_uses_interpolated_history() {
        // same system; on [1,2]: x' = -x + x(t-1) with x(t-1) = (t-1) - 1 + 2 e^{-(t-1)}
        let dde = DdeSystem::new(1.0, 1.0, |x| x, |s| s + 1.0).unwrap();
        let ctl = StepControl { tol: 1e-11, sample_every: Some(0.5), ..Default::default() };
        let tr = integrate_dde(&dde, 2.0, &ctl).unwrap();
        // closed form on [1,2] with x(1) = 2/e:
        // x = e^{-(t-1)} [2/e + int_0^{t-1} e^{u}(u - 1 + 2 e^{-u}) du]
        let exact = |t: f64| {
            let s = t - 1.0;
            let integral = (s - 2.0) * s.exp() + 2.0 + 2.0 * s;
            (-s).exp() * (2.0 / std::f64::consts::E + integral)
        };
        let (_, (x2, _)) = tr.last().unwrap();
        assert!((x2 - exact(2.0)).abs() < 1e-7, "{x2} vs {}", exact(2.0));
    }

    #[test]
    fn rejects_bad_parameters_and_gaps() {
        assert!(DdeSystem::new(0.0, 1.0, |x| x, |_| 0.0).is_err());
        let gap = DdeSystem::new(1.0, 1.0, |x| x, |s| if s < -0.5 { f64::NAN } else { 0.0 }).unwrap();
        assert!(matches!(integrate_dde(&gap, 2.0, &StepControl::default()), Err(Error::HistoryGap { .. })));
    }

    #[test]
    fn map_limit_half_gain() {
        let dde = DdeSystem::normalized(1e-3, |x| 0.5 * x, |_| 1.0).unwrap();
        let ctl = StepControl { tol: 1e-8, sample_every: Some(1.0), ..Default::default() };
        let tr = integrate_dde(&dde, 6.0, &ctl).unwrap();
        let orbit = map_orbit(&dde, 1.0, 6);
        for (k, (x, _)) in tr.points.iter().enumerate() {
            assert!((x - orbit[k]).abs() < 1e-2, "n = {k}: {x} vs {}", orbit[k]);
        }
    }
}
