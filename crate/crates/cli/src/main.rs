use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tslab_cli::config::{BudgetParams, ExperimentConfig, Parameters};
use tslab_cli::experiments::budget_check;
use tslab_cli::scenarios::{catalog, scenario_config, DEFAULT_SEED};
use tslab_cli::{execute, run, ExperimentReport, RunError};

#[derive(Parser)]
#[command(name = "tslab", version, about = "Multi-timescale spiking network experiments")]
struct Cli {
    /// Override the seed of the experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config, or a built-in scenario with --scenario.
    Run {
        #[arg(value_name = "CONFIG", required_unless_present = "scenario", conflicts_with = "scenario")]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Check a trace/membrane timescale budget against a task horizon.
    CheckBudget {
        #[arg(long = "tstar", value_name = "MS")]
        t_star: f64,
        #[arg(long = "F", value_name = "F", default_value_t = 0.5)]
        forgetting: f64,
        #[arg(long = "tau-pre", value_name = "MS", default_value_t = 20.0)]
        tau_pre: f64,
        #[arg(long = "tau-m", value_name = "MS", default_value_t = 20.0)]
        tau_m: f64,
    },
}

fn summarize(report: &ExperimentReport) {
    println!("{} -> {}", report.kind, report.config.output_dir.display());
    for (k, v) in &report.metrics {
        if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e9) {
            println!("  {k:<32} {v:e}");
        } else {
            println!("  {k:<32} {v}");
        }
    }
    println!("  ({} artifacts, {:.2} s)", report.artifacts.len(), report.wall_clock_seconds);
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config: Some(path), .. } => {
            summarize(&run(&path, cli.seed, cli.out)?);
        }
        Command::Run { scenario: Some(name), .. } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out").join(&name));
            let config = scenario_config(&name, cli.seed.unwrap_or(DEFAULT_SEED), &out)
                .ok_or_else(|| RunError::UnknownScenario(name.clone()))?;
            summarize(&execute(&config)?);
        }
        Command::Run { .. } => unreachable!("clap requires a config or a scenario"),
        Command::Scenarios => {
            for s in catalog() {
                println!("{:<24} {}", s.name, s.description);
            }
        }
        Command::CheckBudget {
            t_star,
            forgetting,
            tau_pre,
            tau_m,
        } => {
            let params = BudgetParams {
                t_star_ms: t_star,
                forgetting_factor: forgetting,
                tau_pre_ms: tau_pre,
                tau_m_ms: tau_m,
                ..Default::default()
            };
            let config = ExperimentConfig::new(
                cli.seed.unwrap_or(DEFAULT_SEED),
                cli.out.clone().unwrap_or_default(),
                Parameters::BudgetCheck(params.clone()),
            );
            let outcome = budget_check(&params).map_err(|source| RunError::Experiment {
                kind: config.kind,
                source,
            })?;
            let tau_min = outcome.metrics["tau_min_ms"];
            println!("T* = {t_star} ms, F = {forgetting}: tau_min = {tau_min} ms");
            for (name, tau) in [("tau_pre", tau_pre), ("tau_m", tau_m)] {
                let pass = outcome.metrics[&format!("pass_{name}")] == 1.0;
                println!("  {name:<8} {tau:>10} ms  {}", if pass { "PASS" } else { "FAIL" });
            }
            if cli.out.is_some() {
                execute(&config)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
