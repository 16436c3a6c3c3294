//! JSON model documents.
//!
//! A model document selects either a named built-in with parameters or an
//! inline model assembled from declarative function specs
//! (constant / polynomial / sigmoid / ramp / step / tabulated). The schema:
//!
//! ```json
//! { "model": { "builtin": "worked_example", "params": { "horizon": 1.0 } } }
//! { "model": { "builtin": "regime_switching",
//!              "params": { "k1": 0.5, "k2": -0.5, "threshold": 1.0, "beta": 1.0,
//!                           "h": { "kind": "constant", "value": 0.0 },
//!                           "phi": { "kind": "sigmoid" },
//!                           "x0": 0.0, "horizon": 1.0 } } }
//! { "model": { "builtin": "pricing",
//!              "params": { "dividend_low": 0.05, "dividend_high": 0.1,
//!                           "threshold_r": 0.0, "sigma": 0.2, "alpha": 0.2,
//!                           "gamma": 1.0,
//!                           "constraint": { "lower": 0.0 },
//!                           "payoff": { "kind": "ramp", "strike": 0.0, "width": 1.0 },
//!                           "component": "payoff" } } }
//! { "model": { "inline": {
//!       "drift": { "kind": "polynomial", "coefficients": [0.0, -1.0] },
//!       "diffusion": { "kind": "constant", "value": 1.0 },
//!       "driver": { "kind": "linear", "constant": 0.0,
//!                    "y_coefficient": 0.0, "z_coefficient": 0.0 },
//!       "terminal": { "kind": "sigmoid" },
//!       "x0": 0.0, "horizon": 1.0 } } }
//! ```
//!
//! Derivatives attached to inline coefficients come only from spec families
//! with closed forms (constant, polynomial, sigmoid); ramp, step, and
//! tabulated specs carry none, and downstream operations needing them
//! refuse to run. No symbolic differentiation happens anywhere.

use std::path::Path;
use std::sync::Arc;

use fbsde_core::interp::MonotoneCubic;
use serde::{Deserialize, Serialize};

use crate::builtin::{
    builtin_pricing_model, builtin_regime_switching, builtin_worked_example_with_horizon,
    constant_ts, ramp, sigmoid, PricingParams,
};
use crate::coefficients::{
    CoefficientSet, HolderExponents, ModelError, ModelInstance, OptionalDerivatives, ScalarFn,
    Smoothness, SmoothnessFlags, TimeSpaceFn,
};
use crate::constraint::ConstraintInterval;

/// Declarative one-variable function spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFunctionSpec {
    /// `x ↦ value`.
    Constant { value: f64 },
    /// `x ↦ Σ coefficients[k]·x^k`.
    Polynomial { coefficients: Vec<f64> },
    /// Logistic `e^x/(1+e^x)`.
    Sigmoid,
    /// `clamp((x − strike)/width, 0, 1)`.
    Ramp { strike: f64, width: f64 },
    /// `low·1_{x < threshold} + high·1_{x ≥ threshold}`.
    Step { low: f64, high: f64, threshold: f64 },
    /// Monotone-cubic interpolation of `(nodes, values)`, clamped outside.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl ScalarFunctionSpec {
    /// Builds the callable function.
    pub fn build(&self) -> Result<ScalarFn, ModelError> {
        Ok(match self {
            Self::Constant { value } => {
                let v = *value;
                Arc::new(move |_| v)
            }
            Self::Polynomial { coefficients } => {
                let c = coefficients.clone();
                Arc::new(move |x| c.iter().rev().fold(0.0, |acc, &a| acc * x + a))
            }
            Self::Sigmoid => Arc::new(sigmoid),
            Self::Ramp { strike, width } => {
                if *width == 0.0 {
                    return Err(ModelError::SchemaError("ramp width must be nonzero".into()));
                }
                ramp(*strike, *width)
            }
            Self::Step {
                low,
                high,
                threshold,
            } => {
                let (lo, hi, r) = (*low, *high, *threshold);
                Arc::new(move |x| if x < r { lo } else { hi })
            }
            Self::Tabulated { nodes, values } => {
                let cubic = MonotoneCubic::fit(nodes, values)
                    .map_err(|e| ModelError::SchemaError(format!("tabulated spec: {e}")))?;
                Arc::new(move |x| cubic.eval(x))
            }
        })
    }

    /// First derivative, for the families with a closed form.
    pub fn build_derivative(&self) -> Option<ScalarFn> {
        match self {
            Self::Constant { .. } => Some(Arc::new(|_| 0.0)),
            Self::Polynomial { coefficients } => {
                let d: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &a)| k as f64 * a)
                    .collect();
                Some(Arc::new(move |x| {
                    d.iter().rev().fold(0.0, |acc, &a| acc * x + a)
                }))
            }
            Self::Sigmoid => Some(Arc::new(|x| {
                let s = sigmoid(x);
                s * (1.0 - s)
            })),
            Self::Ramp { .. } | Self::Step { .. } | Self::Tabulated { .. } => None,
        }
    }

    /// Second derivative, for the families with a closed form.
    pub fn build_second_derivative(&self) -> Option<ScalarFn> {
        match self {
            Self::Constant { .. } => Some(Arc::new(|_| 0.0)),
            Self::Polynomial { coefficients } => {
                let d: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, &a)| (k * (k - 1)) as f64 * a)
                    .collect();
                Some(Arc::new(move |x| {
                    d.iter().rev().fold(0.0, |acc, &a| acc * x + a)
                }))
            }
            Self::Sigmoid => Some(Arc::new(|x| {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            })),
            Self::Ramp { .. } | Self::Step { .. } | Self::Tabulated { .. } => None,
        }
    }

    /// Smoothness class implied by the family.
    pub fn smoothness(&self) -> Smoothness {
        match self {
            Self::Constant { .. } | Self::Polynomial { .. } | Self::Sigmoid => Smoothness::C2,
            Self::Ramp { .. } => Smoothness::Lipschitz,
            Self::Step { .. } => Smoothness::Measurable,
            Self::Tabulated { .. } => Smoothness::C1,
        }
    }
}

/// Driver spec for inline models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverSpec {
    /// `f ≡ 0`.
    Zero,
    /// `f(t,x,y,z) = constant + y_coefficient·y + z_coefficient·z`.
    Linear {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        y_coefficient: f64,
        #[serde(default)]
        z_coefficient: f64,
    },
}

impl Default for DriverSpec {
    fn default() -> Self {
        Self::Zero
    }
}

/// Inline model: coefficients as declarative specs, drift a function of `x`
/// alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InlineModelSpec {
    pub drift: ScalarFunctionSpec,
    #[serde(default = "default_unit_diffusion")]
    pub diffusion: ScalarFunctionSpec,
    #[serde(default)]
    pub driver: DriverSpec,
    pub terminal: ScalarFunctionSpec,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Optional explicit regularity metadata; probed from the specs when
    /// absent.
    #[serde(default)]
    pub metadata: Option<InlineMetadata>,
}

/// Explicit metadata override for inline models.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InlineMetadata {
    pub growth_lambda: f64,
    pub ellipticity_lambda: f64,
    pub lipschitz_k: f64,
}

fn default_unit_diffusion() -> ScalarFunctionSpec {
    ScalarFunctionSpec::Constant { value: 1.0 }
}

fn default_horizon() -> f64 {
    1.0
}

/// Parameters for the `worked_example` built-in.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorkedExampleParams {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub x0: f64,
}

impl Default for WorkedExampleParams {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            x0: 0.0,
        }
    }
}

/// Parameters for the `regime_switching` built-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSwitchingDocParams {
    pub k1: f64,
    pub k2: f64,
    pub threshold: f64,
    pub beta: f64,
    #[serde(default = "default_zero_spec")]
    pub h: ScalarFunctionSpec,
    #[serde(default = "default_sigmoid_spec")]
    pub phi: ScalarFunctionSpec,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_zero_spec() -> ScalarFunctionSpec {
    ScalarFunctionSpec::Constant { value: 0.0 }
}

fn default_sigmoid_spec() -> ScalarFunctionSpec {
    ScalarFunctionSpec::Sigmoid
}

/// Endpoint pair for a constraint interval; absent endpoints are infinite.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl ConstraintSpec {
    fn build(&self) -> Result<ConstraintInterval, ModelError> {
        ConstraintInterval::new(
            self.lower.unwrap_or(f64::NEG_INFINITY),
            self.upper.unwrap_or(f64::INFINITY),
        )
    }
}

/// Which half of the pricing pair a generic stage should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingComponent {
    /// Zero terminal condition.
    Zero,
    /// Payoff terminal condition.
    Payoff,
}

/// Parameters for the `pricing` built-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricingDocParams {
    #[serde(default = "default_dividend_low")]
    pub dividend_low: f64,
    #[serde(default = "default_dividend_high")]
    pub dividend_high: f64,
    #[serde(default)]
    pub threshold_r: f64,
    #[serde(default = "default_pricing_sigma")]
    pub sigma: f64,
    /// Constant market price of risk.
    #[serde(default = "default_pricing_alpha")]
    pub alpha: f64,
    #[serde(default = "default_horizon")]
    pub gamma: f64,
    #[serde(default)]
    pub constraint: ConstraintSpec,
    #[serde(default = "default_payoff_spec")]
    pub payoff: ScalarFunctionSpec,
    #[serde(default = "default_component")]
    pub component: PricingComponent,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_dividend_low() -> f64 {
    0.05
}
fn default_dividend_high() -> f64 {
    0.1
}
fn default_pricing_sigma() -> f64 {
    0.2
}
fn default_pricing_alpha() -> f64 {
    0.2
}
fn default_payoff_spec() -> ScalarFunctionSpec {
    ScalarFunctionSpec::Ramp {
        strike: 0.0,
        width: 1.0,
    }
}
fn default_component() -> PricingComponent {
    PricingComponent::Payoff
}

impl Default for PricingDocParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all pricing params have defaults")
    }
}

/// The `model` entry of a document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    /// A named built-in plus its parameter object.
    Builtin {
        builtin: String,
        #[serde(default)]
        params: serde_json::Value,
    },
    /// An inline declarative model.
    Inline { inline: InlineModelSpec },
}

/// Top-level model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub model: ModelSpec,
}

/// Pricing context carried alongside the selected model when the document
/// described the pricing built-in.
#[derive(Clone)]
pub struct PricingContext {
    pub zero_model: ModelInstance,
    pub payoff_model: ModelInstance,
    pub gamma: f64,
    pub alpha: TimeSpaceFn,
    pub constraint: ConstraintInterval,
}

/// A resolved model document: the instance generic stages run on, plus the
/// pricing pair when applicable.
#[derive(Clone)]
pub struct LoadedModel {
    pub instance: ModelInstance,
    pub pricing: Option<PricingContext>,
}

fn parse_params<T: for<'de> Deserialize<'de>>(
    value: &serde_json::Value,
    builtin: &str,
) -> Result<T, ModelError> {
    let v = if value.is_null() {
        serde_json::Value::Object(serde_json::Map::new())
    } else {
        value.clone()
    };
    serde_json::from_value(v)
        .map_err(|e| ModelError::SchemaError(format!("params for builtin '{builtin}': {e}")))
}

/// Builds an inline model instance from its spec.
fn build_inline(spec: &InlineModelSpec) -> Result<ModelInstance, ModelError> {
    let drift = spec.drift.build()?;
    let diffusion = spec.diffusion.build()?;
    let terminal = spec.terminal.build()?;
    let drift_prime = spec.drift.build_derivative();
    let diffusion_prime = spec.diffusion.build_derivative();
    let diffusion_second = spec.diffusion.build_second_derivative();

    let (const_f, coef_y, coef_z) = match spec.driver {
        DriverSpec::Zero => (0.0, 0.0, 0.0),
        DriverSpec::Linear {
            constant,
            y_coefficient,
            z_coefficient,
        } => (constant, y_coefficient, z_coefficient),
    };

    // Probe metadata on a wide slab when not supplied explicitly.
    let metadata = match spec.metadata {
        Some(m) => m,
        None => {
            let (lo, hi, n) = (spec.x0 - 10.0, spec.x0 + 10.0, 2001usize);
            let mut sup_phi: f64 = 0.0;
            let mut min_sigma2 = f64::INFINITY;
            let mut sup_b_slope: f64 = 0.0;
            let mut prev_b = drift(lo);
            let dx = (hi - lo) / (n - 1) as f64;
            for j in 0..n {
                let x = lo + dx * j as f64;
                sup_phi = sup_phi.max(terminal(x).abs());
                let s = diffusion(x);
                min_sigma2 = min_sigma2.min(s * s);
                if j > 0 {
                    let b = drift(x);
                    sup_b_slope = sup_b_slope.max(((b - prev_b) / dx).abs());
                    prev_b = b;
                }
            }
            let growth = sup_phi
                .max(const_f.abs().max(coef_y.abs()))
                .max(1.0);
            InlineMetadata {
                growth_lambda: growth,
                ellipticity_lambda: (min_sigma2 * 0.99).max(1e-12),
                lipschitz_k: sup_b_slope,
            }
        }
    };

    let drift_fn = drift.clone();
    let diffusion_fn = diffusion.clone();
    let derivatives = OptionalDerivatives {
        f_x: Some(Arc::new(|_, _, _, _| 0.0)),
        f_y: Some(Arc::new(move |_, _, _, _| coef_y)),
        f_z: Some(Arc::new(move |_, _, _, _| coef_z)),
        f_xx: Some(Arc::new(|_, _, _, _| 0.0)),
        f_xy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_xz: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yz: Some(Arc::new(|_, _, _, _| 0.0)),
        f_zz: Some(Arc::new(|_, _, _, _| 0.0)),
        phi_prime: spec.terminal.build_derivative(),
        phi_second: spec.terminal.build_second_derivative(),
        b_x: drift_prime.map(|d| -> crate::coefficients::FullCoefficientFn {
            Arc::new(move |_t, x, _y, _z| d(x))
        }),
        b_y: Some(Arc::new(|_, _, _, _| 0.0)),
        b_z: Some(Arc::new(|_, _, _, _| 0.0)),
        sigma_t: Some(constant_ts(0.0)),
        sigma_x: diffusion_prime.map(|d| -> TimeSpaceFn { Arc::new(move |_t, x| d(x)) }),
        sigma_xx: diffusion_second.map(|d| -> TimeSpaceFn { Arc::new(move |_t, x| d(x)) }),
    };

    let coefficients = CoefficientSet {
        drift_b: Arc::new(move |_, x, _, _| drift_fn(x)),
        diffusion_sigma: Arc::new(move |_, x| diffusion_fn(x)),
        driver_f: Arc::new(move |_, _, y, z| const_f + coef_y * y + coef_z * z),
        terminal_phi: terminal,
        growth_lambda: metadata.growth_lambda,
        ellipticity_lambda: metadata.ellipticity_lambda,
        lipschitz_k: metadata.lipschitz_k,
        holder_exponents: HolderExponents::lipschitz(),
        ell: Arc::new(|_| 1.0),
        smoothness_flags: SmoothnessFlags {
            drift_b: spec.drift.smoothness(),
            diffusion_sigma: spec.diffusion.smoothness(),
            driver_f: Smoothness::C2,
            terminal_phi: spec.terminal.smoothness(),
        },
        derivatives,
        sign_converted: false,
        notes: "inline model from JSON document".into(),
    };
    ModelInstance::new(coefficients, spec.x0, spec.horizon, 0.0)
}

/// Resolves a parsed document into a model instance.
pub fn resolve_document(doc: &ModelDocument) -> Result<LoadedModel, ModelError> {
    match &doc.model {
        ModelSpec::Inline { inline } => Ok(LoadedModel {
            instance: build_inline(inline)?,
            pricing: None,
        }),
        ModelSpec::Builtin { builtin, params } => match builtin.as_str() {
            "worked_example" => {
                let p: WorkedExampleParams = parse_params(params, builtin)?;
                if !(p.horizon > 0.0) || !p.horizon.is_finite() {
                    return Err(ModelError::SchemaError(format!(
                        "worked_example horizon = {} must be positive and finite",
                        p.horizon
                    )));
                }
                let base = builtin_worked_example_with_horizon(p.horizon);
                let instance = ModelInstance::new(base.coefficients, p.x0, p.horizon, 0.0)?;
                Ok(LoadedModel {
                    instance,
                    pricing: None,
                })
            }
            "regime_switching" => {
                let p: RegimeSwitchingDocParams = parse_params(params, builtin)?;
                let h = p.h.build()?;
                let phi = p.phi.build()?;
                let mut base = builtin_regime_switching(p.k1, p.k2, p.threshold, p.beta, h, phi);
                base.coefficients.derivatives.phi_prime = p.phi.build_derivative();
                base.coefficients.derivatives.phi_second = p.phi.build_second_derivative();
                let instance = ModelInstance::new(base.coefficients, p.x0, p.horizon, 0.0)?;
                Ok(LoadedModel {
                    instance,
                    pricing: None,
                })
            }
            "pricing" => {
                let p: PricingDocParams = parse_params(params, builtin)?;
                let constraint = p.constraint.build()?;
                let payoff = p.payoff.build()?;
                let pricing_params = PricingParams {
                    dividend_low: p.dividend_low,
                    dividend_high: p.dividend_high,
                    threshold_r: p.threshold_r,
                    sigma: p.sigma,
                    alpha: constant_ts(p.alpha),
                    gamma: p.gamma,
                    constraint,
                    payoff: payoff.clone(),
                    payoff_prime: p.payoff.build_derivative(),
                    x0: p.x0,
                    horizon: p.horizon,
                };
                let alpha = pricing_params.alpha.clone();
                let (zero_model, payoff_model) = builtin_pricing_model(pricing_params)?;
                let instance = match p.component {
                    PricingComponent::Zero => zero_model.clone(),
                    PricingComponent::Payoff => payoff_model.clone(),
                };
                Ok(LoadedModel {
                    instance,
                    pricing: Some(PricingContext {
                        zero_model,
                        payoff_model,
                        gamma: p.gamma,
                        alpha,
                        constraint,
                    }),
                })
            }
            other => Err(ModelError::SchemaError(format!(
                "unknown builtin '{other}'; expected worked_example, regime_switching, or pricing"
            ))),
        },
    }
}

/// Parses and resolves a model document from a JSON string.
pub fn model_from_json_str(text: &str) -> Result<LoadedModel, ModelError> {
    let doc: ModelDocument = serde_json::from_str(text)
        .map_err(|e| ModelError::SchemaError(format!("document parse: {e}")))?;
    resolve_document(&doc)
}

/// Parses and resolves a model document from a file.
pub fn model_from_json_file(path: &Path) -> Result<LoadedModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    model_from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_spec_and_derivatives() {
        let spec = ScalarFunctionSpec::Polynomial {
            coefficients: vec![1.0, -2.0, 3.0],
        };
        let f = spec.build().unwrap();
        assert_eq!(f(2.0), 1.0 - 4.0 + 12.0);
        let d = spec.build_derivative().unwrap();
        assert_eq!(d(2.0), -2.0 + 12.0);
        let d2 = spec.build_second_derivative().unwrap();
        assert_eq!(d2(5.0), 6.0);
    }

    #[test]
    fn step_spec_threshold_is_right_closed() {
        let spec = ScalarFunctionSpec::Step {
            low: -1.0,
            high: 2.0,
            threshold: 0.5,
        };
        let f = spec.build().unwrap();
        assert_eq!(f(0.49), -1.0);
        assert_eq!(f(0.5), 2.0);
        assert!(spec.build_derivative().is_none());
    }

    #[test]
    fn tabulated_spec_interpolates() {
        let spec = ScalarFunctionSpec::Tabulated {
            nodes: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 4.0],
        };
        let f = spec.build().unwrap();
        assert_eq!(f(1.0), 1.0);
        assert!(f(0.5) > 0.0 && f(0.5) < 1.0);
        // Mismatched lengths rejected.
        let bad = ScalarFunctionSpec::Tabulated {
            nodes: vec![0.0, 1.0],
            values: vec![0.0],
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn builtin_document_round_trip() {
        let text = r#"{ "model": { "builtin": "worked_example",
                                    "params": { "horizon": 2.0, "x0": 0.25 } } }"#;
        let loaded = model_from_json_str(text).unwrap();
        assert_eq!(loaded.instance.horizon_t, 2.0);
        assert_eq!(loaded.instance.x0, 0.25);
        assert!(loaded.pricing.is_none());
        assert_eq!((loaded.instance.coefficients.driver_f)(0.0, 0.0, 1.0, 2.0), 3.0);
    }

    #[test]
    fn regime_document_with_specs() {
        let text = r#"{ "model": { "builtin": "regime_switching",
            "params": { "k1": 1.0, "k2": -1.0, "threshold": 0.5, "beta": 2.0,
                         "h": { "kind": "constant", "value": 0.3 },
                         "phi": { "kind": "sigmoid" } } } }"#;
        let loaded = model_from_json_str(text).unwrap();
        let c = &loaded.instance.coefficients;
        assert_eq!((c.driver_f)(0.0, 1.0, 2.0, 0.0), 1.0 - 0.3 * 2.0);
        assert_eq!((c.drift_b)(0.0, 0.0, 0.5, 0.0), 1.0);
        assert!(c.derivatives.phi_prime.is_some());
    }

    #[test]
    fn pricing_document_builds_pair() {
        let text = r#"{ "model": { "builtin": "pricing",
            "params": { "gamma": 1.0, "alpha": 0.2,
                         "constraint": { "lower": 0.0 },
                         "component": "zero" } } }"#;
        let loaded = model_from_json_str(text).unwrap();
        let ctx = loaded.pricing.as_ref().unwrap();
        assert_eq!((loaded.instance.coefficients.terminal_phi)(3.0), 0.0);
        assert_eq!((ctx.payoff_model.coefficients.terminal_phi)(3.0), 1.0);
        assert_eq!(ctx.gamma, 1.0);
        assert_eq!(ctx.constraint.lower, 0.0);
        assert!(ctx.constraint.upper.is_infinite());
    }

    #[test]
    fn inline_document_with_probed_metadata() {
        let text = r#"{ "model": { "inline": {
            "drift": { "kind": "polynomial", "coefficients": [0.0, -1.5] },
            "terminal": { "kind": "sigmoid" },
            "horizon": 1.0 } } }"#;
        let loaded = model_from_json_str(text).unwrap();
        let c = &loaded.instance.coefficients;
        assert_eq!((c.drift_b)(0.0, 2.0, 9.0, 9.0), -3.0);
        assert_eq!((c.diffusion_sigma)(0.0, 5.0), 1.0);
        assert!((c.lipschitz_k - 1.5).abs() < 1e-9);
        assert!(c.derivatives.b_x.is_some());
        assert_eq!(
            c.derivatives.b_x.as_ref().unwrap()(0.0, 7.0, 0.0, 0.0),
            -1.5
        );
        loaded.instance.validate_on_domain(-5.0, 5.0, 101).unwrap();
    }

    #[test]
    fn unknown_builtin_rejected() {
        let text = r#"{ "model": { "builtin": "nope", "params": {} } }"#;
        assert!(matches!(
            model_from_json_str(text),
            Err(ModelError::SchemaError(_))
        ));
    }

    #[test]
    fn garbage_rejected() {
        assert!(matches!(
            model_from_json_str("not json"),
            Err(ModelError::SchemaError(_))
        ));
        assert!(model_from_json_str(r#"{ "model": { "builtin": "pricing",
            "params": { "sigma": -1.0 } } }"#)
            .is_err());
    }
}
