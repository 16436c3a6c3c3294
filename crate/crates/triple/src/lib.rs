//! Solution-triple layer: reads the backward pair `(Y, Z)` off the
//! decoupling field along simulated forward paths, audits the discrete
//! backward equation, and runs the shared-noise ordering experiments
//! (comonotonicity of the integrands, pointwise field comparison).
//!
//! The field is the single source of truth for the backward components
//! — there is deliberately no pathwise backward solver here. Everything
//! in this crate is evaluation, bookkeeping, and statistics.

pub mod ordering;
pub mod reconstruct;
pub mod residual;

use thiserror::Error;

pub use ordering::{
    comonotonicity_check, comonotonicity_check_with_fields, comparison_check, compare_fields,
    ComonotonicityReport, ComparisonReport, COMONOTONE_TOLERANCE,
};
pub use reconstruct::{field_coupled_drift, reconstruct_triple, TripleEnsemble};
pub use residual::{bsde_residual, ResidualStats};

/// Failures of the reconstruction layer.
#[derive(Debug, Error)]
pub enum TripleError {
    /// Field and ensemble (or two fields) do not share the required
    /// axes.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// A field solve performed on behalf of an experiment failed.
    #[error(transparent)]
    Field(#[from] fbsde_field::FieldError),
}
