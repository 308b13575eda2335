//! Built-in reproduction scenarios.

use std::path::Path;

use crate::config::{
    BudgetParams, DdeParams, EpropParams, ExperimentConfig, McSweepParams, Parameters, ReservoirActivation,
    SlowfastParams,
};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
}

const CATALOG: &[Scenario] = &[
    Scenario {
        name: "paper-alpha-check",
        description: "membrane decay factor for tau_m = 20 ms at 1 ms steps (alpha ~ 0.95)",
    },
    Scenario {
        name: "paper-budget-phoneme",
        description: "timescale budget at T* = 10 ms with tau_pre = tau_m = 20 ms: both constraints pass",
    },
    Scenario {
        name: "paper-budget-rl",
        description: "timescale budget at T* = 2000 ms with tau_pre = tau_m = 20 ms: both constraints fail",
    },
    Scenario {
        name: "eprop-sine-tracking",
        description: "50-neuron LIF network learns a 2 Hz sine with e-prop over 30 epochs",
    },
    Scenario {
        name: "mc-bound-suite",
        description: "memory capacity of 10 linear ESNs per size N in {10, 20, 50} and of delay lines",
    },
    Scenario {
        name: "slowfast-order-check",
        description: "manifold gap versus epsilon and slow/fast frame equivalence on the linear testbed",
    },
    Scenario {
        name: "dde-map-limit",
        description: "delay equation at epsilon = 1e-3 against the iterated map x -> 0.5 x",
    },
];

pub fn catalog() -> &'static [Scenario] {
    CATALOG
}

/// The config a scenario runs, writing into `output_dir`.
pub fn scenario_config(name: &str, seed: u64, output_dir: &Path) -> Option<ExperimentConfig> {
    let parameters = match name {
        "paper-alpha-check" | "paper-budget-phoneme" => Parameters::BudgetCheck(BudgetParams::default()),
        "paper-budget-rl" => Parameters::BudgetCheck(BudgetParams {
            t_star_ms: 2000.0,
            ..Default::default()
        }),
        "eprop-sine-tracking" => Parameters::EpropTrain(EpropParams::default()),
        "mc-bound-suite" => Parameters::McSweep(McSweepParams {
            sizes: vec![10, 20, 50],
            reservoirs: 10,
            activation: ReservoirActivation::Identity,
            shift_register: true,
            ..Default::default()
        }),
        "slowfast-order-check" => Parameters::SlowfastStudy(SlowfastParams::default()),
        "dde-map-limit" => Parameters::DdeStudy(DdeParams::default()),
        _ => return None,
    };
    Some(ExperimentConfig::new(seed, output_dir, parameters))
}
