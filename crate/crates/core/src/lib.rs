//! Multi-timescale laboratory for spiking networks and dynamical systems.
//!
//! - [`signal`]: signal containers, the exponential spike filter and seeded noise
//! - [`lif`]: discrete-time recurrent LIF network simulation
//! - [`eprop`]: eligibility-propagation online learning
//! - [`timescale`]: forgetting factors and time-constant budgets
//! - [`memcap`]: reservoir memory capacity
//! - [`slowfast`] / [`dde`]: slow-fast ODE and delay-equation integrators

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde;
pub mod eprop;
pub mod error;
pub mod lif;
pub(crate) mod matrix;
pub mod memcap;
pub mod ode;
pub mod rng;
pub mod signal;
pub mod slowfast;
pub mod timescale;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use signal::{decay_factor, exp_filter, white_noise, AnalogSignal, SpikeRaster};

/// Crate version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
