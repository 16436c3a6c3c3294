//! Shared numerical kernels for the coupled-FBSDE laboratory.
//!
//! Everything in this crate is generic over the scalar type through the
//! [`Real`] trait (any `num_traits::Float` with conversion and threading
//! bounds), so the kernels can be instantiated at `f32` for quick scans or
//! `f64` for production runs. The pipeline crates work at `f64`; the
//! concrete aliases at the crate root fix that choice in one place.
//!
//! Contents:
//! - [`grid`]: uniform space-time meshes shared by the PDE and Monte Carlo
//!   stages, with deterministic node generation;
//! - [`tridiag`]: Thomas-algorithm solves for the implicit time stepping;
//! - [`interp`]: monotonicity-preserving cubic interpolation of gridded
//!   fields along paths;
//! - [`quadrature`]: Gauss–Hermite rules for Gaussian reference
//!   expectations;
//! - [`stats`]: order-deterministic sample statistics and
//!   Kolmogorov–Smirnov tests;
//! - [`binning`]: equal-count conditional-expectation regression.

pub mod binning;
pub mod grid;
pub mod interp;
pub mod quadrature;
pub mod scalar;
pub mod stats;
pub mod tridiag;

pub use scalar::Real;

/// Default scalar type for the pipeline crates.
pub type Scalar = f64;

/// Uniform space-time mesh at the default scalar.
pub type Grid = grid::SpaceTimeGrid<Scalar>;

/// Monotone cubic interpolant at the default scalar.
pub type Cubic = interp::MonotoneCubic<Scalar>;

/// Gauss–Hermite quadrature rule at the default scalar.
pub type Quadrature = quadrature::GaussHermite<Scalar>;

/// Equal-count regression output at the default scalar.
pub type Regression = binning::BinnedRegression<Scalar>;
