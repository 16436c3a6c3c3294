//! Finite-difference machinery for decoupling fields.
//!
//! The coupled system
//!
//! ```text
//! dX_t = b(t, X_t, Y_t, Z_t) dt + σ(t, X_t) dW_t,
//! dY_t = −f(t, X_t, Y_t, Z_t) dt + Z_t dW_t,   Y_T = φ(X_T),
//! ```
//!
//! is decoupled by the field `v` solving the quasi-linear terminal value
//! problem `∂_t v + ½σ² v_xx + b(t,x,v,v_x) v_x + f(t,x,v,v_x) = 0`,
//! `v(T,·) = φ`: then `Y_t = v(t, X_t)`, `Z_t = σ(t, X_t) v_x(t, X_t)`,
//! and the forward equation closes with the autonomous drift
//! `b̃(t,x) = b(t,x,v,v_x)`. This crate solves that problem on a uniform
//! space-time grid (implicit diffusion, damped Picard on the
//! nonlinearities), differentiates and interpolates the result, tabulates
//! `b̃`, and solves the linear auxiliary equation
//! `∂_t U + ½σ² U_xx + b̃ U_x − μU = −b̃` used by the drift-removal
//! transform.

pub mod array2;
pub mod decoupling;
pub mod solver;

pub use array2::Field2;
pub use decoupling::{
    gradient_and_hessian, transformed_drift, DecouplingField, FieldMetadata, GridFunction,
    InterpolationRule, RowInterpolant,
};
pub use solver::{
    gradient_bound_report, solve_decoupling_field, solve_kolmogorov_u, FieldError,
    GradientBoundCheck, GradientBoundReport, IterationReport, KolmogorovSolution, Scheme,
    SolverConfig,
};
