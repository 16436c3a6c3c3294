//! Declarative coefficient sets for coupled forward-backward systems.
//!
//! A model is the quadruple (b, σ, f, φ) for
//!
//! ```text
//! dX_t = b(t, X_t, Y_t, Z_t) dt + σ(t, X_t) dW_t,      X_0 = x0,
//! dY_t = −f(t, X_t, Y_t, Z_t) dt + Z_t dW_t,           Y_T = φ(X_T),
//! ```
//!
//! together with the regularity metadata the diagnostics need: the growth
//! constant Λ, the ellipticity floor λ for σ², the drift Lipschitz constant
//! K, Hölder exponents, the quadratic-growth modulus ℓ, per-coefficient
//! smoothness flags, and optional closed-form derivatives.
//!
//! All backward equations are stored in the `dY = −f dt + Z dW` sign
//! convention; constructors for models naturally posed with the opposite
//! sign convert the driver and record the conversion in the metadata notes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from model construction and validation.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A constraint interval with lower bound above its upper bound.
    #[error("invalid interval: lower {lower} > upper {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
    /// Metadata violates its own declared ranges (non-positive ellipticity,
    /// Hölder exponent outside (0, 1], start time at or past the horizon...).
    #[error("invalid model metadata: {0}")]
    InvalidMetadata(String),
    /// A sampled invariant failed on the truncated domain.
    #[error("coefficient invariant violated: {0}")]
    ConstraintViolated(String),
    /// A JSON model document did not match the schema.
    #[error("model document rejected: {0}")]
    SchemaError(String),
    /// Reading a model document failed.
    #[error("could not read model document: {0}")]
    Io(#[from] std::io::Error),
}

/// Coefficient of the full state `(t, x, y, z)`.
pub type FullCoefficientFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// Coefficient of `(t, x)` only (diffusion and its derivatives).
pub type TimeSpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Function of a single real argument (terminal condition, ℓ modulus).
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smoothness class declared for a coefficient, from rawest to smoothest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    /// Merely measurable (e.g. an indicator switch).
    Measurable,
    /// Hölder continuous with the exponent recorded in [`HolderExponents`].
    Holder,
    /// Globally Lipschitz.
    Lipschitz,
    /// Continuously differentiable.
    C1,
    /// Twice continuously differentiable.
    C2,
}

/// Declared smoothness per coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothnessFlags {
    pub drift_b: Smoothness,
    pub diffusion_sigma: Smoothness,
    pub driver_f: Smoothness,
    pub terminal_phi: Smoothness,
}

/// Hölder exponents attached to the model, each in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents {
    /// Exponent θ of the drift in its spatial argument.
    pub theta_drift: f64,
    /// Exponent β of the terminal condition.
    pub beta_terminal: f64,
    /// Exponent α₀ of the squared diffusion in its spatial argument.
    pub alpha0_diffusion: f64,
}

impl HolderExponents {
    /// All exponents equal to one (Lipschitz everywhere).
    pub fn lipschitz() -> Self {
        Self {
            theta_drift: 1.0,
            beta_terminal: 1.0,
            alpha0_diffusion: 1.0,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (name, e) in [
            ("theta_drift", self.theta_drift),
            ("beta_terminal", self.beta_terminal),
            ("alpha0_diffusion", self.alpha0_diffusion),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(ModelError::InvalidMetadata(format!(
                    "Hölder exponent {name} = {e} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Optional closed-form derivatives.
///
/// Nothing here is ever produced by symbolic differentiation of arbitrary
/// code: a derivative is either supplied by a built-in constructor that
/// knows its formula, or absent — in which case the operations that need it
/// refuse to run with a `MissingDerivatives`-style error.
#[derive(Clone, Default)]
pub struct OptionalDerivatives {
    pub f_x: Option<FullCoefficientFn>,
    pub f_y: Option<FullCoefficientFn>,
    pub f_z: Option<FullCoefficientFn>,
    pub f_xx: Option<FullCoefficientFn>,
    pub f_xy: Option<FullCoefficientFn>,
    pub f_xz: Option<FullCoefficientFn>,
    pub f_yy: Option<FullCoefficientFn>,
    pub f_yz: Option<FullCoefficientFn>,
    pub f_zz: Option<FullCoefficientFn>,
    /// φ′.
    pub phi_prime: Option<ScalarFn>,
    /// φ″.
    pub phi_second: Option<ScalarFn>,
    pub b_x: Option<FullCoefficientFn>,
    pub b_y: Option<FullCoefficientFn>,
    pub b_z: Option<FullCoefficientFn>,
    pub sigma_t: Option<TimeSpaceFn>,
    pub sigma_x: Option<TimeSpaceFn>,
    pub sigma_xx: Option<TimeSpaceFn>,
}

impl OptionalDerivatives {
    /// True when the drift's partial derivatives in all three state
    /// arguments are available (needed for the chain rule on the
    /// transformed drift).
    pub fn has_full_drift_gradient(&self) -> bool {
        self.b_x.is_some() && self.b_y.is_some() && self.b_z.is_some()
    }

    /// True when the diffusion derivatives entering the explicit first
    /// variational representation are available.
    pub fn has_diffusion_derivatives(&self) -> bool {
        self.sigma_t.is_some() && self.sigma_x.is_some() && self.sigma_xx.is_some()
    }
}

impl fmt::Debug for OptionalDerivatives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut present: Vec<&str> = Vec::new();
        macro_rules! record {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { present.push(stringify!($field)); })*
            };
        }
        record!(
            f_x, f_y, f_z, f_xx, f_xy, f_xz, f_yy, f_yz, f_zz, phi_prime, phi_second, b_x, b_y,
            b_z, sigma_t, sigma_x, sigma_xx
        );
        f.debug_struct("OptionalDerivatives")
            .field("present", &present)
            .finish()
    }
}

/// The declarative model: coefficient functions plus regularity metadata.
///
/// Immutable after construction; the function handles are shared atomics,
/// so cloning is cheap and evaluation is re-entrant.
#[derive(Clone)]
pub struct CoefficientSet {
    /// Forward drift b(t, x, y, z).
    pub drift_b: FullCoefficientFn,
    /// Forward diffusion σ(t, x).
    pub diffusion_sigma: TimeSpaceFn,
    /// Backward driver f(t, x, y, z) in the `dY = −f dt + Z dW` convention.
    pub driver_f: FullCoefficientFn,
    /// Terminal condition φ(x).
    pub terminal_phi: ScalarFn,
    /// Growth constant Λ ≥ 0 bounding |φ| and the linear part of f.
    pub growth_lambda: f64,
    /// Ellipticity floor λ > 0 with σ(t,x)² ≥ λ.
    pub ellipticity_lambda: f64,
    /// Drift Lipschitz/weak-derivative constant K ≥ 0.
    pub lipschitz_k: f64,
    /// Hölder exponents (θ, β, α₀).
    pub holder_exponents: HolderExponents,
    /// Quadratic-growth modulus ℓ(y), locally bounded and nondecreasing.
    pub ell: ScalarFn,
    /// Declared smoothness per coefficient.
    pub smoothness_flags: SmoothnessFlags,
    /// Closed-form derivatives where available.
    pub derivatives: OptionalDerivatives,
    /// Whether the stored driver was sign-converted from a `+f dt` source.
    pub sign_converted: bool,
    /// Free-form construction notes (conventions, conversions, parameters).
    pub notes: String,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("growth_lambda", &self.growth_lambda)
            .field("ellipticity_lambda", &self.ellipticity_lambda)
            .field("lipschitz_k", &self.lipschitz_k)
            .field("holder_exponents", &self.holder_exponents)
            .field("smoothness_flags", &self.smoothness_flags)
            .field("derivatives", &self.derivatives)
            .field("sign_converted", &self.sign_converted)
            .field("notes", &self.notes)
            .finish()
    }
}

impl CoefficientSet {
    /// Validates the scalar metadata (positivity and exponent ranges).
    pub fn validate_metadata(&self) -> Result<(), ModelError> {
        if !(self.growth_lambda >= 0.0) {
            return Err(ModelError::InvalidMetadata(format!(
                "growth_lambda = {} must be nonnegative",
                self.growth_lambda
            )));
        }
        if !(self.ellipticity_lambda > 0.0) {
            return Err(ModelError::InvalidMetadata(format!(
                "ellipticity_lambda = {} must be positive",
                self.ellipticity_lambda
            )));
        }
        if !(self.lipschitz_k >= 0.0) {
            return Err(ModelError::InvalidMetadata(format!(
                "lipschitz_k = {} must be nonnegative",
                self.lipschitz_k
            )));
        }
        self.holder_exponents.validate()
    }
}

/// A coefficient set anchored at an initial state and horizon.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub coefficients: CoefficientSet,
    /// Initial forward state.
    pub x0: f64,
    /// Terminal time T > t0.
    pub horizon_t: f64,
    /// Initial time t0 ∈ [0, T).
    pub t0: f64,
}

impl ModelInstance {
    /// Builds an instance, validating the time interval and metadata.
    pub fn new(
        coefficients: CoefficientSet,
        x0: f64,
        horizon_t: f64,
        t0: f64,
    ) -> Result<Self, ModelError> {
        if !(t0 < horizon_t) {
            return Err(ModelError::InvalidMetadata(format!(
                "start time t0 = {t0} must precede the horizon T = {horizon_t}"
            )));
        }
        if !t0.is_finite() || !horizon_t.is_finite() || !x0.is_finite() {
            return Err(ModelError::InvalidMetadata(
                "x0, t0, horizon must be finite".into(),
            ));
        }
        coefficients.validate_metadata()?;
        Ok(Self {
            coefficients,
            x0,
            horizon_t,
            t0,
        })
    }

    /// Checks the sampled coefficient invariants on the truncated domain
    /// `[x_min, x_max]`:
    ///
    /// - `σ(t, x)² ≥ λ` at every probe point;
    /// - `|φ(x)| ≤ Λ`;
    /// - `|f(t, x, y, 0)| ≤ Λ (1 + |y|)` (the quadratic part vanishes at
    ///   `z = 0`);
    /// - ℓ nondecreasing over probed `y` values.
    pub fn validate_on_domain(
        &self,
        x_min: f64,
        x_max: f64,
        n_probe: usize,
    ) -> Result<(), ModelError> {
        let c = &self.coefficients;
        let n = n_probe.max(3);
        let xs: Vec<f64> = (0..n)
            .map(|j| x_min + (x_max - x_min) * j as f64 / (n - 1) as f64)
            .collect();
        let ts: Vec<f64> = (0..8)
            .map(|m| self.t0 + (self.horizon_t - self.t0) * m as f64 / 7.0)
            .collect();
        let ys: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.5).collect();

        for &t in &ts {
            for &x in &xs {
                let s = (c.diffusion_sigma)(t, x);
                if !(s * s >= c.ellipticity_lambda - 1e-12) {
                    return Err(ModelError::ConstraintViolated(format!(
                        "sigma({t}, {x})^2 = {} below ellipticity floor {}",
                        s * s,
                        c.ellipticity_lambda
                    )));
                }
                for &y in &ys {
                    let f0 = (c.driver_f)(t, x, y, 0.0);
                    if !(f0.abs() <= c.growth_lambda * (1.0 + y.abs()) + 1e-12) {
                        return Err(ModelError::ConstraintViolated(format!(
                            "|f({t}, {x}, {y}, 0)| = {} exceeds Lambda(1+|y|) = {}",
                            f0.abs(),
                            c.growth_lambda * (1.0 + y.abs())
                        )));
                    }
                }
            }
        }
        for &x in &xs {
            let p = (c.terminal_phi)(x);
            if !(p.abs() <= c.growth_lambda + 1e-12) {
                return Err(ModelError::ConstraintViolated(format!(
                    "|phi({x})| = {} exceeds Lambda = {}",
                    p.abs(),
                    c.growth_lambda
                )));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for &y in &ys {
            let e = (c.ell)(y.abs());
            if e < prev - 1e-12 {
                return Err(ModelError::ConstraintViolated(format!(
                    "ell decreases at y = {y}: {e} < {prev}"
                )));
            }
            if e < 0.0 {
                return Err(ModelError::ConstraintViolated(format!(
                    "ell({y}) = {e} negative"
                )));
            }
            prev = e;
        }
        Ok(())
    }
}
