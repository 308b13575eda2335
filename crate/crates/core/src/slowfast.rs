//! Two-timescale systems with one fast variable `x` and one slow variable `y`.
//!
//! In original time `T`:  `tau1 dx/dT = f(x, y)`, `tau2 dy/dT = g(x, y)`.
//! With `eps = tau1 / tau2` and `T = s tau2` (slow time) or `T = t tau1` (fast time):
//!
//! ```text
//! slow frame s:  eps dx/ds = f,   dy/ds = g
//! fast frame t:      dx/dt = f,   dy/dt = eps g
//! ```
//!
//! Setting `eps = 0` in the slow frame gives the reduced problem on the
//! critical manifold `f(x, y) = 0`; in the fast frame it gives the layer problem
//! with `y` frozen.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::ode::{integrate, StepControl};

pub type PlaneField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Threshold on `|df/dx|` below which a manifold point counts as non-hyperbolic.
pub const HYPERBOLICITY_THRESHOLD: f64 = 1e-6;
/// Finite-difference step for `df/dx`.
const FD_STEP: f64 = 1e-6;
/// Root refinement tolerance.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct SlowFastSystem {
    f: PlaneField,
    g: PlaneField,
    pub tau1_ms: f64,
    pub tau2_ms: f64,
}

impl fmt::Debug for SlowFastSystem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("SlowFastSystem")
            .field("tau1_ms", &self.tau1_ms)
            .field("tau2_ms", &self.tau2_ms)
            .finish_non_exhaustive()
    }
}

impl SlowFastSystem {
    pub fn new<F, G>(f: F, g: G, tau1_ms: f64, tau2_ms: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(tau1_ms > 0.0) || !(tau2_ms > 0.0) {
            return Err(domain(format!(
                "time constants must be positive, got tau1 = {tau1_ms}, tau2 = {tau2_ms}"
            )));
        }
        Ok(Self {
            f: Arc::new(f),
            g: Arc::new(g),
            tau1_ms,
            tau2_ms,
        })
    }

    /// System in slow-frame normal form with `tau2 = 1` and `tau1 = eps`.
    pub fn with_epsilon<F, G>(f: F, g: G, eps: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(f, g, eps, 1.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.tau1_ms / self.tau2_ms
    }

    pub fn f(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    pub fn g(&self, x: f64, y: f64) -> f64 {
        (self.g)(x, y)
    }

    /// `df/dx` by central difference.
    pub fn dfdx(&self, x: f64, y: f64) -> f64 {
        (self.f(x + FD_STEP, y) - self.f(x - FD_STEP, y)) / (2.0 * FD_STEP)
    }

    /// Velocity field `(dx, dy)` in the requested time frame.
    pub fn velocity(&self, x: f64, y: f64, frame: TimeFrame) -> (f64, f64) {
        let (f, g) = (self.f(x, y), self.g(x, y));
        match frame {
            TimeFrame::Original => (f / self.tau1_ms, g / self.tau2_ms),
            TimeFrame::Slow => (f / self.epsilon(), g),
            TimeFrame::Fast => (f, self.epsilon() * g),
        }
    }
}

/// Time axis of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeFrame {
    /// Physical time `T` in milliseconds.
    #[serde(rename = "T")]
    Original,
    /// Slow time `s = T / tau2`.
    #[serde(rename = "s")]
    Slow,
    /// Fast time `t = T / tau1`.
    #[serde(rename = "t")]
    Fast,
}

impl TimeFrame {
    pub fn tag(self) -> &'static str {
        match self {
            TimeFrame::Original => "T",
            TimeFrame::Slow => "s",
            TimeFrame::Fast => "t",
        }
    }

    /// Physical milliseconds per unit of this frame.
    fn unit_ms(self, tau1_ms: f64, tau2_ms: f64) -> f64 {
        match self {
            TimeFrame::Original => 1.0,
            TimeFrame::Slow => tau2_ms,
            TimeFrame::Fast => tau1_ms,
        }
    }
}

impl FromStr for TimeFrame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(TimeFrame::Original),
            "s" => Ok(TimeFrame::Slow),
            "t" => Ok(TimeFrame::Fast),
            other => Err(contract(format!("unknown time frame {other:?}; expected T, s or t"))),
        }
    }
}

impl fmt::Display for TimeFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Sampled planar trajectory tagged with its time frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub frame: TimeFrame,
    pub tau1_ms: f64,
    pub tau2_ms: f64,
}

/// Metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub frame: TimeFrame,
    pub tau1_ms: f64,
    pub tau2_ms: f64,
    pub epsilon: f64,
    pub samples: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, (f64, f64))> {
        Some((*self.times.last()?, *self.points.last()?))
    }

    /// Strictly increasing finite times and finite points.
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.points.len() {
            return Err(contract("trajectory times and points differ in length"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("trajectory times are not strictly increasing"));
        }
        if self.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(contract("trajectory has non-finite points"));
        }
        Ok(())
    }

    pub fn sidecar(&self) -> TrajectorySidecar {
        TrajectorySidecar {
            frame: self.frame,
            tau1_ms: self.tau1_ms,
            tau2_ms: self.tau2_ms,
            epsilon: self.tau1_ms / self.tau2_ms,
            samples: self.len(),
        }
    }

    /// `time,x,y` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "x", "y"])?;
        for (t, (x, y)) in self.times.iter().zip(&self.points) {
            w.write_record([t.to_string(), x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rescales the time axis to `target`; points are untouched.
pub fn reparameterize(traj: &Trajectory, target: TimeFrame) -> Trajectory {
    let from = traj.frame.unit_ms(traj.tau1_ms, traj.tau2_ms);
    let to = target.unit_ms(traj.tau1_ms, traj.tau2_ms);
    let factor = from / to;
    Trajectory {
        times: traj.times.iter().map(|t| t * factor).collect(),
        points: traj.points.clone(),
        frame: target,
        tau1_ms: traj.tau1_ms,
        tau2_ms: traj.tau2_ms,
    }
}

fn divergence_guard(bound: f64) -> impl FnMut(f64, &[f64; 2]) -> Result<()> {
    move |t, y| match y.iter().find(|v| v.abs() > bound) {
        Some(&v) => Err(Error::Divergence { time: t, value: v.abs() }),
        None => Ok(()),
    }
}

/// States beyond this magnitude abort integration.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Integrates the full system in the chosen frame over `[0, horizon]` (frame units).
pub fn integrate_full(
    system: &SlowFastSystem,
    x0: f64,
    y0: f64,
    horizon: f64,
    frame: TimeFrame,
    ctl: &StepControl,
) -> Result<Trajectory> {
    let rhs = |_: f64, s: &[f64; 2]| {
        let (dx, dy) = system.velocity(s[0], s[1], frame);
        Ok([dx, dy])
    };
    let (times, states) = integrate(rhs, 0.0, [x0, y0], horizon, ctl, divergence_guard(DIVERGENCE_BOUND))?;
    Ok(Trajectory {
        times,
        points: states.into_iter().map(|s| (s[0], s[1])).collect(),
        frame,
        tau1_ms: system.tau1_ms,
        tau2_ms: system.tau2_ms,
    })
}

/// Layer problem: `dx/dt = f(x, y_frozen)` in fast time.
pub fn integrate_layer(
    system: &SlowFastSystem,
    x0: f64,
    y_frozen: f64,
    horizon: f64,
    ctl: &StepControl,
) -> Result<Trajectory> {
    let rhs = |_: f64, s: &[f64; 2]| Ok([system.f(s[0], y_frozen), 0.0]);
    let (times, states) = integrate(rhs, 0.0, [x0, y_frozen], horizon, ctl, divergence_guard(DIVERGENCE_BOUND))?;
    Ok(Trajectory {
        times,
        points: states.into_iter().map(|s| (s[0], s[1])).collect(),
        frame: TimeFrame::Fast,
        tau1_ms: system.tau1_ms,
        tau2_ms: system.tau2_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Attracting,
    Repelling,
    NonHyperbolic,
}

impl Stability {
    pub fn classify(dfdx: f64) -> Self {
        if dfdx < -HYPERBOLICITY_THRESHOLD {
            Stability::Attracting
        } else if dfdx > HYPERBOLICITY_THRESHOLD {
            Stability::Repelling
        } else {
            Stability::NonHyperbolic
        }
    }
}

/// Search window for roots of `f(., y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootWindow {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Number of scan subintervals used for bracketing.
    pub grid: usize,
}

impl Default for RootWindow {
    fn default() -> Self {
        Self {
            x_lo: -10.0,
            x_hi: 10.0,
            grid: 4000,
        }
    }
}

/// Refines a bracketed root with a secant/bisection hybrid.
pub fn refine_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        if (b - a).abs() < ROOT_TOL {
            break;
        }
        let mid = 0.5 * (a + b);
        let secant = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        // secant only when it stays well inside the bracket
        let c = if secant.is_finite() && secant > lo + 0.1 * (hi - lo) && secant < hi - 0.1 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
    }
    0.5 * (a + b)
}

/// All sign-change roots of `f` on a uniform scan of `[lo, hi]`.
pub fn bracketed_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let grid = grid.max(1);
    let dx = (hi - lo) / grid as f64;
    let mut roots = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    if f_prev == 0.0 {
        roots.push(lo);
    }
    for k in 1..=grid {
        let x = if k == grid { hi } else { lo + k as f64 * dx };
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if f_prev != 0.0 && (fx < 0.0) != (f_prev < 0.0) && f_prev.is_finite() && fx.is_finite() {
            roots.push(refine_root(&f, x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub y: f64,
    pub x: f64,
    pub stability: Stability,
}

/// Samples the critical manifold `f(x, y) = 0` on `samples` evenly spaced `y` values.
pub fn critical_manifold(
    system: &SlowFastSystem,
    y_lo: f64,
    y_hi: f64,
    samples: usize,
    window: &RootWindow,
) -> Result<Vec<ManifoldPoint>> {
    if !(y_lo < y_hi) {
        return Err(domain(format!("need y_lo < y_hi, got [{y_lo}, {y_hi}]")));
    }
    if samples == 0 {
        return Err(domain("at least one sample is required"));
    }
    let mut points = Vec::new();
    for k in 0..samples {
        let y = if samples == 1 {
            y_lo
        } else {
            y_lo + (y_hi - y_lo) * k as f64 / (samples - 1) as f64
        };
        for x in bracketed_roots(|x| system.f(x, y), window.x_lo, window.x_hi, window.grid) {
            points.push(ManifoldPoint {
                y,
                x,
                stability: Stability::classify(system.dfdx(x, y)),
            });
        }
    }
    Ok(points)
}

/// CSV `y,x_star,stability` for manifold samples.
pub fn write_manifold_csv<W: Write>(points: &[ManifoldPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["y", "x_star", "stability"])?;
    for p in points {
        let tag = match p.stability {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
            Stability::NonHyperbolic => "non-hyperbolic",
        };
        w.write_record([p.y.to_string(), p.x.to_string(), tag.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Continues the branch of `f(., y) = 0` through `x_prev` with the given stability sign.
///
/// Searches outward from `x_prev` for a sign change of the matching orientation
/// (`+ -> -` for attracting branches) and returns the nearest one within `reach`.
pub fn track_root(system: &SlowFastSystem, y: f64, x_prev: f64, attracting: bool, reach: f64) -> Option<f64> {
    let f = |x: f64| system.f(x, y);
    let mut radius = 1e-6_f64.max(1e-9 * x_prev.abs());
    while radius <= reach {
        let pieces = 32;
        let lo = x_prev - radius;
        let dx = 2.0 * radius / pieces as f64;
        let mut best: Option<f64> = None;
        let mut a = lo;
        let mut fa = f(a);
        for k in 1..=pieces {
            let b = lo + k as f64 * dx;
            let fb = f(b);
            let falling = fa > 0.0 && fb <= 0.0;
            let rising = fa < 0.0 && fb >= 0.0;
            if (attracting && falling) || (!attracting && rising) {
                let r = refine_root(f, a, b);
                if best.is_none_or(|c| (r - x_prev).abs() < (c - x_prev).abs()) {
                    best = Some(r);
                }
            }
            a = b;
            fa = fb;
        }
        if best.is_some() {
            return best;
        }
        radius *= 2.0;
    }
    None
}

/// Options for the reduced-problem integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReducedOptions {
    /// Nominal RK4 step in slow time.
    pub step: f64,
    /// Step below which a lost root is declared a fold.
    pub min_step: f64,
    /// Farthest the tracked root may move per stage.
    pub reach: f64,
    pub window: RootWindow,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            min_step: 1e-10,
            reach: 0.5,
            window: RootWindow::default(),
        }
    }
}

/// Reduced problem `dy/ds = g(x*(y), y)` with `x*` tracked along one manifold branch.
pub fn integrate_reduced(
    system: &SlowFastSystem,
    y0: f64,
    horizon: f64,
    branch_hint: f64,
    opts: &ReducedOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    let candidates = bracketed_roots(|x| system.f(x, y0), opts.window.x_lo, opts.window.x_hi, opts.window.grid);
    let x0 = candidates
        .iter()
        .copied()
        .min_by(|a, b| (a - branch_hint).abs().total_cmp(&(b - branch_hint).abs()))
        .ok_or_else(|| domain(format!("no root of f(., {y0}) in the search window")))?;
    let stability = Stability::classify(system.dfdx(x0, y0));
    if stability == Stability::NonHyperbolic {
        return Err(Error::ManifoldFold { x: x0, y: y0, time: 0.0 });
    }
    let attracting = stability == Stability::Attracting;

    // x* on the branch, or None once the branch is lost or hyperbolicity fails
    let solve = |y: f64, x_near: f64| -> Option<f64> {
        let x = track_root(system, y, x_near, attracting, opts.reach)?;
        (Stability::classify(system.dfdx(x, y)) == stability).then_some(x)
    };

    let mut times = vec![0.0];
    let mut points = vec![(x0, y0)];
    let (mut s, mut x, mut y) = (0.0, x0, y0);
    let mut h = opts.step.min(horizon);
    while s < horizon {
        let step = h.min(horizon - s);
        let rk4 = || -> Option<(f64, f64)> {
            let k1 = system.g(x, y);
            let x2 = solve(y + 0.5 * step * k1, x)?;
            let k2 = system.g(x2, y + 0.5 * step * k1);
            let x3 = solve(y + 0.5 * step * k2, x2)?;
            let k3 = system.g(x3, y + 0.5 * step * k2);
            let x4 = solve(y + step * k3, x3)?;
            let k4 = system.g(x4, y + step * k3);
            let y_new = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let x_new = solve(y_new, x4)?;
            Some((x_new, y_new))
        };
        match rk4() {
            Some((xn, yn)) => {
                s = if step == horizon - s { horizon } else { s + step };
                x = xn;
                y = yn;
                times.push(s);
                points.push((x, y));
                h = (h * 2.0).min(opts.step);
            }
            None => {
                h *= 0.5;
                if h < opts.min_step {
                    return Err(Error::ManifoldFold { x, y, time: s });
                }
            }
        }
    }
    Ok(Trajectory {
        times,
        points,
        frame: TimeFrame::Slow,
        tau1_ms: system.tau1_ms,
        tau2_ms: system.tau2_ms,
    })
}

/// Largest `|x - x*(y)|` over trajectory points with time `>= after`,
/// where `x*` is the root of `f(., y)` nearest to `x`.
pub fn manifold_gap(system: &SlowFastSystem, traj: &Trajectory, after: f64, window: &RootWindow) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for (t, &(x, y)) in traj.times.iter().zip(&traj.points) {
        if *t < after {
            continue;
        }
        let roots = bracketed_roots(|u| system.f(u, y), window.x_lo, window.x_hi, window.grid);
        let nearest = roots
            .iter()
            .map(|r| (x - r).abs())
            .fold(f64::INFINITY, f64::min);
        if !nearest.is_finite() {
            return Err(Error::ManifoldFold { x, y, time: *t });
        }
        gap = gap.max(nearest);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(eps: f64) -> SlowFastSystem {
        SlowFastSystem::with_epsilon(|x, y| y - x, |_, y| -y, eps).unwrap()
    }

    fn cubic(g: f64) -> SlowFastSystem {
        SlowFastSystem::with_epsilon(move |x, y| y - (x * x * x / 3.0 - x), move |_, _| g, 0.01).unwrap()
    }

    fn tight() -> StepControl {
        StepControl { tol: 1e-10, ..Default::default() }
    }

    #[test]
    fn scalar_decay() {
        let sys = SlowFastSystem::with_epsilon(|x, _| -x, |_, _| 0.0, 1.0).unwrap();
        let tr = integrate_full(&sys, 1.5, 0.0, 4.0, TimeFrame::Fast, &tight()).unwrap();
        for (t, (x, _)) in tr.times.iter().zip(&tr.points) {
            assert!((x - 1.5 * (-t).exp()).abs() < 1e-6);
        }
        tr.validate().unwrap();
    }

    #[test]
    fn fast_variable_tracks_slow_one() {
        let sys = linear(0.01);
        let ctl = StepControl { sample_every: Some(0.01), ..tight() };
        let tr = integrate_full(&sys, 0.0, 1.0, 2.0, TimeFrame::Slow, &ctl).unwrap();
        for (t, (x, y)) in tr.times.iter().zip(&tr.points) {
            if *t > 0.05 {
                assert!((x - y).abs() < 2.0 * 0.01, "t = {t}");
            }
        }
    }

    #[test]
    fn reduced_linear_branch_is_explicit() {
        let sys = linear(0.01);
        let tr = integrate_reduced(&sys, 2.0, 1.0, 0.0, &ReducedOptions::default()).unwrap();
        for (s, (x, y)) in tr.times.iter().zip(&tr.points) {
            assert!((x - y).abs() < 1e-9);
            assert!((y - 2.0 * (-s).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn reduced_constant_when_g_vanishes() {
        let sys = cubic(0.0);
        let tr = integrate_reduced(&sys, 0.2, 1.0, 2.0, &ReducedOptions::default()).unwrap();
        let (x0, y0) = tr.points[0];
        assert!(tr.points.iter().all(|&(x, y)| (x - x0).abs() < 1e-9 && y == y0));
    }

    #[test]
    fn fold_is_detected_at_unit_x() {
        let sys = cubic(-1.0);
        let err = integrate_reduced(&sys, 1.0, 5.0, 2.0, &ReducedOptions::default()).unwrap_err();
        match err {
            Error::ManifoldFold { x, y, .. } => {
                assert!((x - 1.0).abs() < 1e-2, "x = {x}");
                assert!((y + 2.0 / 3.0).abs() < 1e-3, "y = {y}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn layer_reaches_equilibrium() {
        let sys = linear(0.1);
        let tr = integrate_layer(&sys, -3.0, 2.0, 40.0, &tight()).unwrap();
        let (_, (x, _)) = tr.last().unwrap();
        assert!((x - 2.0).abs() < 1e-8);
        assert!(sys.f(x, 2.0).abs() < 1e-8);
    }

    #[test]
    fn bistable_layer_splits_by_initial_condition() {
        let sys = cubic(0.0);
        let y = 0.2;
        let left = integrate_layer(&sys, -0.5, y, 60.0, &tight()).unwrap().last().unwrap().1 .0;
        let right = integrate_layer(&sys, 0.5, y, 60.0, &tight()).unwrap().last().unwrap().1 .0;
        // the middle root lies near -0.2; f < 0 just left of it and > 0 just right
        assert!(left < -1.0 && right > 1.0, "{left} {right}");
        assert!(sys.f(left, y).abs() < 1e-8 && sys.f(right, y).abs() < 1e-8);
    }

    #[test]
    fn manifold_branches() {
        let lin = critical_manifold(&linear(0.1), -1.0, 1.0, 5, &RootWindow::default()).unwrap();
        assert_eq!(lin.len(), 5);
        for p in &lin {
            assert!((p.x - p.y).abs() < 1e-9);
            assert_eq!(p.stability, Stability::Attracting);
        }
        let cub = critical_manifold(&cubic(0.0), 0.3, 0.3, 1, &RootWindow::default());
        assert!(cub.is_err());
        let cub = critical_manifold(&cubic(0.0), -0.5, 0.5, 3, &RootWindow::default()).unwrap();
        assert_eq!(cub.len(), 9);
        for y in [-0.5, 0.0, 0.5] {
            let row: Vec<_> = cub.iter().filter(|p| p.y == y).collect();
            assert_eq!(row.len(), 3);
            assert_eq!(row[0].stability, Stability::Attracting);
            assert_eq!(row[1].stability, Stability::Repelling);
            assert_eq!(row[2].stability, Stability::Attracting);
        }
        let none = SlowFastSystem::with_epsilon(|_, _| 1.0, |_, _| 0.0, 0.1).unwrap();
        assert!(critical_manifold(&none, 0.0, 1.0, 4, &RootWindow::default()).unwrap().is_empty());
    }

    #[test]
    fn frame_round_trip_and_unit_epsilon() {
        let sys = linear(0.05);
        let tr = integrate_full(&sys, 0.0, 1.0, 1.0, TimeFrame::Slow, &tight()).unwrap();
        let back = reparameterize(&reparameterize(&tr, TimeFrame::Fast), TimeFrame::Slow);
        for (a, b) in tr.times.iter().zip(&back.times) {
            assert!((a - b).abs() < 1e-12);
        }
        let unit = SlowFastSystem::new(|x, y| y - x, |_, y| -y, 3.0, 3.0).unwrap();
        let tr = integrate_full(&unit, 0.0, 1.0, 1.0, TimeFrame::Slow, &tight()).unwrap();
        assert_eq!(reparameterize(&tr, TimeFrame::Fast).times, tr.times);
        assert_eq!(reparameterize(&tr, TimeFrame::Original).times.last(), Some(&3.0));
    }

    #[test]
    fn frame_tags_parse() {
        assert_eq!("s".parse::<TimeFrame>().unwrap(), TimeFrame::Slow);
        assert!(matches!("q".parse::<TimeFrame>(), Err(Error::Contract(_))));
    }
}
