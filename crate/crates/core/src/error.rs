use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes, lengths or sampling steps of the operands do not agree.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical blow-up: membrane potential of neuron {neuron} became {value}")]
    NumericalBlowup { neuron: usize, value: f64 },

    #[error("training diverged at step {step}: weight norm {norm:.3e} exceeds bound {bound:.3e}")]
    TrainingDiverged { step: usize, norm: f64, bound: f64 },

    #[error("degenerate regression target for delay {delay}: zero variance")]
    DegenerateTarget { delay: usize },

    #[error(
        "step size underflow at time {time} (h = {step:.3e}); system too stiff for explicit \
         integration, consider the reduced problem"
    )]
    StiffFailure { time: f64, step: f64 },

    #[error("critical manifold fold reached; last valid point x = {x}, y = {y} at s = {time}")]
    ManifoldFold { x: f64, y: f64, time: f64 },

    #[error("trajectory diverged at time {time}: |x| = {value:.3e}")]
    Divergence { time: f64, value: f64 },

    #[error("delay history has no value at time {time}")]
    HistoryGap { time: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad inputs or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. }
                | Error::TrainingDiverged { .. }
                | Error::DegenerateTarget { .. }
                | Error::StiffFailure { .. }
                | Error::ManifoldFold { .. }
                | Error::Divergence { .. }
        )
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
