//! Monte Carlo engine for the forward half of the system: left-endpoint
//! Euler–Maruyama simulation with reproducible per-path noise
//! substreams, retained or streamed ensembles, Brownian time reversal
//! with the bridge-compensated auxiliary increments, and
//! change-of-measure weights.
//!
//! Determinism is the organizing constraint: every path's noise is a
//! pure function of `(seed, global path index)`, parallel workers write
//! only their own pre-assigned slices, and all floating-point
//! reductions happen sequentially in path order. Identical inputs give
//! bit-identical ensembles on any thread count.

pub mod engine;
pub mod ensemble;
pub mod girsanov;
pub mod reversal;

use thiserror::Error;

pub use engine::{
    brownian_increments, euler_drive, redrive, scan_forward, scan_noise, simulate_forward,
    simulate_forward_range,
};
pub use ensemble::{EnsembleSummary, ExitStats, PathEnsemble, EULER_LEFT_SCHEME};
pub use girsanov::girsanov_weight;
pub use reversal::{time_reversed_paths, ReversedEnsemble};

/// Failures of the simulation layer.
#[derive(Debug, Error)]
pub enum PathError {
    /// Time reversal requested on an ensemble whose stored increments
    /// do not reproduce its states, i.e. anything but a zero-drift,
    /// unit-diffusion run.
    #[error("not a Brownian ensemble: {0}")]
    NotBrownian(String),
    /// Malformed binary ensemble data.
    #[error("binary ensemble format: {0}")]
    Format(String),
    /// Underlying I/O failure during export or import.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
