//! Model definitions for the coupled forward–backward SDE laboratory.
//!
//! A model is the coefficient quadruple of the system
//!
//! ```text
//! dX_t = b(t, X_t, Y_t, Z_t) dt + σ(t, X_t) dW_t,     X_0 = x0,
//! dY_t = −f(t, X_t, Y_t, Z_t) dt + Z_t dW_t,          Y_T = φ(X_T),
//! ```
//!
//! together with the structural metadata every downstream stage relies on:
//! growth and ellipticity constants, a drift Lipschitz bound, Hölder
//! exponents, the local-bound function ℓ for the quadratic part of the
//! driver, per-coefficient smoothness flags, and (optionally) closed-form
//! partial derivatives.
//!
//! The crate ships three built-in families — the logistic-terminal worked
//! example, a regime-switching drift whose level depends on the backward
//! component, and the utility-indifference pricing pair with a dividend
//! switch — plus a JSON document loader that can also assemble models
//! inline from declarative function specs.

pub mod builtin;
pub mod coefficients;
pub mod constraint;
pub mod document;

pub use builtin::{
    builtin_pricing_model, builtin_regime_switching, builtin_worked_example,
    builtin_worked_example_with_horizon, constant, constant_ts, ramp, sigmoid, PricingParams,
};
pub use coefficients::{
    CoefficientSet, FullCoefficientFn, HolderExponents, ModelError, ModelInstance,
    OptionalDerivatives, ScalarFn, Smoothness, SmoothnessFlags, TimeSpaceFn,
};
pub use constraint::{indifference_driver_dz, indifference_driver_value, ConstraintInterval};
pub use document::{
    model_from_json_file, model_from_json_str, DriverSpec, InlineModelSpec, LoadedModel,
    ModelDocument, ModelSpec, PricingComponent, PricingContext, ScalarFunctionSpec,
};
