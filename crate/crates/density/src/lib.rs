//! Density laboratory: kernel estimation, Gaussian sandwich and tail
//! verification, and the integration-by-parts density representation.
//!
//! For a Malliavin-differentiable functional `F` with covariance integral
//!
//! ```text
//! g_F = ∫₀ᵀ D_s F · E[D_s F | 𝔉_s] ds,      0 < l ≤ g_F ≤ L  a.s.,
//! ```
//!
//! the law of `F` has a density squeezed between two explicit Gaussian
//! envelopes,
//!
//! ```text
//! E|F−EF|/(2L) · exp(−(x−EF)²/(2l))  ≤  ρ_F(x)  ≤  E|F−EF|/(2l) · exp(−(x−EF)²/(2L)),
//! ```
//!
//! and its tails obey `P(F ≥ x) ≤ exp(−(x−EF)²/(2L))` (same on the left).
//! This crate verifies those statements against Monte Carlo ensembles:
//!
//! * [`kde`] — Gaussian-kernel density estimation with Silverman bandwidth
//!   and a binned multinomial bootstrap for pointwise standard errors;
//! * [`gaussian_sandwich_check`] / [`tail_check`] — envelope and tail
//!   audits of a sample against supplied `(l, L)`;
//! * [`density_bounds_x`], [`density_bounds_y`], [`density_bounds_z`] —
//!   assemble `(l, L)` for the forward state, the value process
//!   `Y = v(t, X)` and the control `Z = σ·∂_x v` from constants measured
//!   on the solved decoupling field over the region the paths actually
//!   occupy, then delegate to the audits;
//! * [`skorohod_density_representation`] — reconstructs the density from
//!   the anticipative-integral formula
//!   `ρ_F(x) = ρ_F(x₀)·exp(−∫_{x₀}^x w(z) dz)` with
//!   `w(z) = E[δ((∫₀ᵀ D_s F ds)⁻¹) | F = z]`, estimated by equal-count
//!   bin regression.
//!
//! Everything here is a *verifier*: the envelopes are exact statements
//! about the true density, while the kernel estimate carries sampling
//! noise, so all comparisons carry explicit tolerance bands derived from
//! bootstrap standard errors.

mod bounds;
mod envelopes;
mod estimate;
mod skorohod;

use serde::Serialize;
use thiserror::Error;

pub use bounds::{
    density_bounds_x, density_bounds_x_with_config, density_bounds_y, density_bounds_y_with_config,
    density_bounds_z, density_bounds_z_with_config, BoundsConfig, OccupiedRegion,
};
pub use envelopes::{
    gaussian_envelopes, gaussian_sandwich_check, tail_check, BoundReport, EnvelopeConstants,
    TailProbe, TailReport,
};
pub use estimate::{
    holder_probe, kde, kde_with_errors, BandwidthRule, DensityEstimate, HolderProbe,
    KdeDiagnostics,
};
pub use skorohod::{
    malliavin_double_integral, malliavin_first_integral, skorohod_density_representation,
    SkorohodDensity,
};

/// Errors surfaced by the density laboratory.
#[derive(Debug, Error)]
pub enum DensityError {
    /// Kernel estimation needs a minimum sample count before bandwidth
    /// selection is meaningful.
    #[error("too few samples for density estimation: need {needed}, got {got}")]
    TooFewSamples {
        /// Minimum accepted count.
        needed: usize,
        /// Count supplied.
        got: usize,
    },
    /// The covariance bounds are inverted (`l > L`), so no sandwich exists.
    #[error("bad covariance bounds: lower {lower} exceeds upper {upper}")]
    BadBounds {
        /// Claimed lower bound `l`.
        lower: f64,
        /// Claimed upper bound `L`.
        upper: f64,
    },
    /// A quantity the bound construction divides by is (numerically) zero:
    /// vanishing bandwidth, vanishing gradient or curvature over the
    /// occupied region, or a vanishing Malliavin covariance integral.
    /// Density existence is not certified in this situation.
    #[error("degenerate density input: {0}")]
    Degenerate(String),
    /// The model does not declare the drift derivative needed to certify
    /// a finite slope bound for the envelope exponents.
    #[error("missing derivatives: {0}")]
    MissingDerivatives(String),
    /// The integration-by-parts correction term needs second-order
    /// derivative integrals that were not supplied.
    #[error("missing second derivatives: {0}")]
    MissingSecondDerivatives(String),
}

/// Which estimator produced a [`DensityEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityEstimator {
    /// Gaussian-kernel density estimate.
    Kde,
    /// Integration-by-parts (anticipative-integral) representation.
    Representation,
}
