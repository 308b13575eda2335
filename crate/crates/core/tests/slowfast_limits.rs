use tslab_core::dde::{integrate_dde, map_orbit, DdeSystem};
use tslab_core::ode::StepControl;
use tslab_core::slowfast::{
    critical_manifold, integrate_full, integrate_layer, integrate_reduced, manifold_gap, reparameterize,
    ReducedOptions, RootWindow, SlowFastSystem, Stability, TimeFrame,
};

fn linear(eps: f64) -> SlowFastSystem {
    SlowFastSystem::with_epsilon(|x, y| y - x, |_, y| -y, eps).unwrap()
}

#[test]
fn manifold_gap_halves_with_epsilon() {
    let ctl = StepControl { tol: 1e-10, ..Default::default() };
    let gaps: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&eps| {
            let sys = linear(eps);
            let traj = integrate_full(&sys, 0.8, 1.0, 3.0, TimeFrame::Slow, &ctl).unwrap();
            manifold_gap(&sys, &traj, 5.0 * eps, &RootWindow::default()).unwrap()
        })
        .collect();
    for w in gaps.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 0.5).abs() <= 0.2, "gaps {gaps:?}");
    }
}

#[test]
fn reduced_flow_follows_slow_exponential() {
    let sys = linear(0.01);
    let red = integrate_reduced(&sys, 1.0, 2.0, 1.0, &ReducedOptions::default()).unwrap();
    let (s, (x, y)) = red.last().unwrap();
    assert!((y - (-s).exp()).abs() < 1e-9);
    assert!((x - y).abs() < 1e-9);
}

#[test]
fn slow_and_fast_frames_agree() {
    let tol = 1e-9;
    let eps = 0.05;
    let sys = SlowFastSystem::with_epsilon(|x, y| y - x * x * x, |x, _| -x, eps).unwrap();
    let slow = StepControl { tol, sample_every: Some(0.05), ..Default::default() };
    let fast = StepControl { tol, sample_every: Some(0.05 / eps), ..Default::default() };
    let a = integrate_full(&sys, 0.5, 1.0, 2.0, TimeFrame::Slow, &slow).unwrap();
    let b = integrate_full(&sys, 0.5, 1.0, 2.0 / eps, TimeFrame::Fast, &fast).unwrap();
    let b = reparameterize(&b, TimeFrame::Slow);
    assert_eq!(a.len(), b.len());
    for k in 0..a.len() {
        assert!((a.times[k] - b.times[k]).abs() < 1e-12);
        assert!((a.points[k].0 - b.points[k].0).abs() < 10.0 * tol, "k = {k}");
        assert!((a.points[k].1 - b.points[k].1).abs() < 10.0 * tol, "k = {k}");
    }
}

#[test]
fn attracting_points_are_layer_equilibria() {
    let sys = SlowFastSystem::with_epsilon(|x, y| y - (x * x * x / 3.0 - x), |_, _| 0.0, 0.01).unwrap();
    let pts = critical_manifold(&sys, -0.6, 1.5, 8, &RootWindow::default()).unwrap();
    let ctl = StepControl { tol: 1e-10, ..Default::default() };
    let mut checked = 0;
    for p in pts.iter().filter(|p| p.stability == Stability::Attracting) {
        for dx in [-0.01, 0.01] {
            let traj = integrate_layer(&sys, p.x + dx, p.y, 40.0, &ctl).unwrap();
            let (_, (x_end, _)) = traj.last().unwrap();
            assert!((x_end - p.x).abs() < 1e-6, "{p:?} from {dx}");
            checked += 1;
        }
    }
    assert!(checked >= 16);
}

#[test]
fn delay_samples_follow_the_map() {
    let dde = DdeSystem::normalized(1e-3, |x| 0.5 * x, |_| 1.0).unwrap();
    let ctl = StepControl { tol: 1e-9, sample_every: Some(1.0), ..Default::default() };
    let traj = integrate_dde(&dde, 8.0, &ctl).unwrap();
    let orbit = map_orbit(&dde, 1.0, 8);
    for (n, &(x, _)) in traj.points.iter().enumerate() {
        assert!((x - orbit[n]).abs() < 1e-2, "n = {n}: {x} vs {}", orbit[n]);
    }
}
