//! Occupation densities, space-time local-time integrals, and flow
//! regularity diagnostics along simulated paths.
//!
//! Three estimator families live here, all consuming ensembles from the
//! path engine:
//!
//! * **Occupation densities** ([`level_local_time`]): the local time a
//!   path accrues at a fixed spatial level `R`, estimated by the
//!   band-occupation quotient `(2ε)⁻¹ ∫ 1{|X_s−R|<ε}·σ²(s,X_s) ds`.
//!
//! * **Space-time sheet integrals** ([`spacetime_local_time_integral`]):
//!   the integral `∫∫ φ(s,z) L(ds,dz)` of a bounded kernel against the
//!   Brownian local-time sheet, assembled per path from a forward Itô
//!   sum, a time-reversed Itô sum, and a bridge-compensator correction.
//!   No mollification enters. For differentiable kernels the sheet
//!   integral equals `−∫ ∂_xφ(s, W^x_s) ds`, which turns otherwise
//!   hostile objects — exponential moments under discontinuous drifts,
//!   derivatives of flows that are nowhere classically differentiable —
//!   into plain Monte Carlo averages
//!   ([`exponential_moment_check`], [`sobolev_flow_decomposition`]).
//!
//! * **Flow derivatives** ([`sobolev_flow_smooth`] and friends): the
//!   spatial derivative `ξ_t = ∂X_t/∂x` of the forward flow in
//!   exponential form. When the drift slope exists the exponent is
//!   `∫ ∂_x b̃(u, X_u) du`; when it does not, the same exponent is
//!   reached through the sheet integral as `−∫∫ b̃ L(du,dz)`, which
//!   never differentiates the drift at all. Either way `ξ > 0` by
//!   construction.
//!
//! Every scalar estimate carries provenance: the estimator family that
//! produced it and the resolution knobs (`ε`, `dt`) it was computed at,
//! so downstream reports can state not just a number but how it was
//! reached.

use serde::Serialize;
use thiserror::Error;

mod flow;
mod level;
mod spacetime;

pub use flow::{
    sobolev_flow_decomposition, sobolev_flow_from_table, sobolev_flow_smooth,
    sobolev_flow_smooth_checked, FlowDerivative,
};
pub use level::{default_epsilon, level_local_time, level_local_time_mean};
pub use spacetime::{
    exponential_moment_check, spacetime_local_time_integral, spacetime_local_time_scan,
    ExponentialMomentReport, SpacetimeDecomposition,
};

/// Failure modes of the local-time estimators.
#[derive(Debug, Error)]
pub enum LocalTimeError {
    /// The reversed-time decomposition is a statement about Brownian
    /// motion; the ensemble handed in was simulated with drift or
    /// non-unit diffusion.
    #[error("ensemble is not Brownian: {0}")]
    NotBrownian(String),
    /// The smooth flow route needs the drift's spatial slope, which the
    /// model does not declare.
    #[error("missing derivatives: {0}")]
    MissingDerivatives(String),
}

/// Which estimator produced a value — serialized with reports so a
/// number is never separated from its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Band-occupation quotient at a fixed spatial level.
    Occupation,
    /// Forward/reversed Itô decomposition of the sheet integral.
    Decomposition,
    /// Exponential of the integrated drift slope along paths.
    SmoothRoute,
}

/// A local-time estimate together with the estimator that produced it
/// and the resolution it was computed at.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalTimeResult {
    /// The estimate (a single-path value or an ensemble mean).
    pub value: f64,
    /// Estimator family (provenance).
    pub estimator: EstimatorKind,
    /// Band half-width for occupation estimates; `None` for the
    /// decomposition and smooth routes, which have no band.
    pub epsilon: Option<f64>,
    /// Time-step the estimate was computed at.
    pub dt: f64,
    /// Monte Carlo standard error when the value is an ensemble mean;
    /// `None` for single-path values.
    pub standard_error: Option<f64>,
}
