//! Built-in model instances.
//!
//! Three families ship with the laboratory:
//!
//! - the closed-form benchmark: zero drift, unit diffusion, linear driver
//!   `f = y + z`, logistic terminal condition — the model every solver
//!   stage is validated against, because its value field reduces to a heat
//!   semigroup average;
//! - a regime-switching model whose drift jumps between two mean-reversion
//!   levels when the backward component crosses a threshold;
//! - the utility-indifference pricing pair: a dividend-switching forward
//!   price and the quadratic constrained driver, once with zero terminal
//!   condition and once with the payoff.

use std::sync::Arc;

use crate::coefficients::{
    CoefficientSet, HolderExponents, ModelError, ModelInstance, OptionalDerivatives, ScalarFn,
    Smoothness, SmoothnessFlags, TimeSpaceFn,
};
use crate::constraint::{indifference_driver_dz, indifference_driver_value, ConstraintInterval};

/// Numerically stable logistic function `e^x / (1 + e^x)`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bounded Lipschitz ramp payoff `clamp((x − strike)/width, 0, 1)`.
pub fn ramp(strike: f64, width: f64) -> ScalarFn {
    Arc::new(move |x: f64| ((x - strike) / width).clamp(0.0, 1.0))
}

/// Constant function of one variable.
pub fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

/// Constant function of `(t, x)`.
pub fn constant_ts(c: f64) -> TimeSpaceFn {
    Arc::new(move |_, _| c)
}

/// Largest absolute value of `f` over an even lattice on `[lo, hi]`.
fn probe_sup_abs(f: &ScalarFn, lo: f64, hi: f64, n: usize) -> f64 {
    let mut sup: f64 = 0.0;
    for j in 0..n {
        let x = lo + (hi - lo) * j as f64 / (n - 1) as f64;
        sup = sup.max(f(x).abs());
    }
    sup
}

/// The closed-form benchmark model: `b ≡ 0`, `σ ≡ 1`, `f(t,x,y,z) = y + z`,
/// `φ(x) = e^x/(1+e^x)`, horizon 1.
pub fn builtin_worked_example() -> ModelInstance {
    builtin_worked_example_with_horizon(1.0)
}

/// The benchmark model with a configurable horizon.
pub fn builtin_worked_example_with_horizon(horizon: f64) -> ModelInstance {
    let derivatives = OptionalDerivatives {
        f_x: Some(Arc::new(|_, _, _, _| 0.0)),
        f_y: Some(Arc::new(|_, _, _, _| 1.0)),
        f_z: Some(Arc::new(|_, _, _, _| 1.0)),
        f_xx: Some(Arc::new(|_, _, _, _| 0.0)),
        f_xy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_xz: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yz: Some(Arc::new(|_, _, _, _| 0.0)),
        f_zz: Some(Arc::new(|_, _, _, _| 0.0)),
        phi_prime: Some(Arc::new(|x| {
            let s = sigmoid(x);
            s * (1.0 - s)
        })),
        phi_second: Some(Arc::new(|x| {
            let s = sigmoid(x);
            s * (1.0 - s) * (1.0 - 2.0 * s)
        })),
        b_x: Some(Arc::new(|_, _, _, _| 0.0)),
        b_y: Some(Arc::new(|_, _, _, _| 0.0)),
        b_z: Some(Arc::new(|_, _, _, _| 0.0)),
        sigma_t: Some(constant_ts(0.0)),
        sigma_x: Some(constant_ts(0.0)),
        sigma_xx: Some(constant_ts(0.0)),
    };
    let coefficients = CoefficientSet {
        drift_b: Arc::new(|_, _, _, _| 0.0),
        diffusion_sigma: constant_ts(1.0),
        driver_f: Arc::new(|_, _, y, z| y + z),
        terminal_phi: Arc::new(sigmoid),
        growth_lambda: 1.0,
        ellipticity_lambda: 1.0,
        lipschitz_k: 0.0,
        holder_exponents: HolderExponents::lipschitz(),
        ell: constant(1.0),
        smoothness_flags: SmoothnessFlags {
            drift_b: Smoothness::C2,
            diffusion_sigma: Smoothness::C2,
            driver_f: Smoothness::C2,
            terminal_phi: Smoothness::C2,
        },
        derivatives,
        sign_converted: false,
        notes: "benchmark: b=0, sigma=1, f=y+z, logistic terminal".into(),
    };
    ModelInstance::new(coefficients, 0.0, horizon, 0.0)
        .expect("benchmark model metadata is statically valid")
}

/// Regime-switching model: drift `k(y) − β x` with
/// `k(y) = k1·1_{y ≤ threshold} + k2·1_{y > threshold}`, unit diffusion,
/// stored driver `f(t,x,y,z) = 1 − h(x)·y`.
///
/// The threshold branch is left-closed exactly as posed: `y = threshold`
/// takes `k1`. The source model is written with a `+f dt` backward sign;
/// the driver stored here is the converted one and the conversion is
/// recorded in the metadata notes.
pub fn builtin_regime_switching(
    k1: f64,
    k2: f64,
    threshold: f64,
    beta: f64,
    h: ScalarFn,
    phi: ScalarFn,
) -> ModelInstance {
    let sup_h = probe_sup_abs(&h, -10.0, 10.0, 2001);
    let sup_phi = probe_sup_abs(&phi, -10.0, 10.0, 2001);
    let growth_lambda = sup_h.max(sup_phi).max(1.0);
    let degenerate_switch = k1 == k2;

    let h_drift = h.clone();
    let derivatives = OptionalDerivatives {
        f_y: Some(Arc::new(move |_, x, _, _| -h_drift(x))),
        f_z: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yz: Some(Arc::new(|_, _, _, _| 0.0)),
        f_zz: Some(Arc::new(|_, _, _, _| 0.0)),
        b_x: Some(Arc::new(move |_, _, _, _| -beta)),
        b_y: if degenerate_switch {
            Some(Arc::new(|_, _, _, _| 0.0))
        } else {
            None
        },
        b_z: Some(Arc::new(|_, _, _, _| 0.0)),
        sigma_t: Some(constant_ts(0.0)),
        sigma_x: Some(constant_ts(0.0)),
        sigma_xx: Some(constant_ts(0.0)),
        ..OptionalDerivatives::default()
    };
    let h_driver = h;
    let coefficients = CoefficientSet {
        drift_b: Arc::new(move |_, x, y, _| {
            let k = if y <= threshold { k1 } else { k2 };
            k - beta * x
        }),
        diffusion_sigma: constant_ts(1.0),
        driver_f: Arc::new(move |_, x, y, _| 1.0 - h_driver(x) * y),
        terminal_phi: phi,
        growth_lambda,
        ellipticity_lambda: 1.0,
        lipschitz_k: beta.abs(),
        holder_exponents: HolderExponents::lipschitz(),
        ell: constant(1.0),
        smoothness_flags: SmoothnessFlags {
            drift_b: if degenerate_switch {
                Smoothness::C2
            } else {
                Smoothness::Measurable
            },
            diffusion_sigma: Smoothness::C2,
            driver_f: Smoothness::Measurable,
            terminal_phi: Smoothness::Lipschitz,
        },
        derivatives,
        sign_converted: true,
        notes: format!(
            "regime switching: drift k(y) - beta*x with k1={k1}, k2={k2}, threshold={threshold}, \
             beta={beta}; driver converted from the +f dt source convention to 1 - h(x)*y"
        ),
    };
    ModelInstance::new(coefficients, 0.0, 1.0, 0.0)
        .expect("regime-switching metadata is valid for finite parameters")
}

/// Parameters of the utility-indifference pricing pair.
#[derive(Clone)]
pub struct PricingParams {
    /// Dividend yield active on `{x < threshold_r}`.
    pub dividend_low: f64,
    /// Dividend yield active on `{x ≥ threshold_r}` (right-closed branch).
    pub dividend_high: f64,
    /// Dividend switch level R.
    pub threshold_r: f64,
    /// Volatility σ > 0.
    pub sigma: f64,
    /// Market price of risk α(t, x).
    pub alpha: TimeSpaceFn,
    /// Risk aversion γ > 0.
    pub gamma: f64,
    /// Admissible-strategy constraint set C.
    pub constraint: ConstraintInterval,
    /// Claim payoff F(x).
    pub payoff: ScalarFn,
    /// Optional closed-form payoff derivative.
    pub payoff_prime: Option<ScalarFn>,
    /// Initial log-price.
    pub x0: f64,
    /// Horizon T.
    pub horizon: f64,
}

impl Default for PricingParams {
    fn default() -> Self {
        Self {
            dividend_low: 0.05,
            dividend_high: 0.1,
            threshold_r: 0.0,
            sigma: 0.2,
            alpha: constant_ts(0.2),
            gamma: 1.0,
            constraint: ConstraintInterval::real_line(),
            payoff: ramp(0.0, 1.0),
            payoff_prime: None,
            x0: 0.0,
            horizon: 1.0,
        }
    }
}

/// Builds the pricing pair sharing the forward dynamics
/// `dX = −(λ·1_{x<R} + λ̂·1_{x≥R} + σ²/2) dt + σ dW`: the first model has
/// terminal condition 0, the second the payoff `F`.
///
/// Both carry the stored-convention driver `f̄ = −f` with `f` the
/// indifference generator of [`indifference_driver_value`]; the sign
/// conversion from the `Y_s = ξ − ∫ f − ∫ Z dW` source convention is
/// recorded in the metadata notes.
pub fn builtin_pricing_model(
    params: PricingParams,
) -> Result<(ModelInstance, ModelInstance), ModelError> {
    if !(params.sigma > 0.0) {
        return Err(ModelError::InvalidMetadata(format!(
            "pricing sigma = {} must be positive",
            params.sigma
        )));
    }
    if !(params.gamma > 0.0) {
        return Err(ModelError::InvalidMetadata(format!(
            "pricing gamma = {} must be positive",
            params.gamma
        )));
    }
    // Re-validate the interval: the struct can be built literally.
    ConstraintInterval::new(params.constraint.lower, params.constraint.upper)?;

    let degenerate_switch = params.dividend_low == params.dividend_high;
    let half_var = params.sigma * params.sigma / 2.0;
    let (low, high, r) = (params.dividend_low, params.dividend_high, params.threshold_r);
    let drift: crate::coefficients::FullCoefficientFn = Arc::new(move |_, x, _, _| {
        let dividend = if x < r { low } else { high };
        -(dividend + half_var)
    });

    let gamma = params.gamma;
    let cset = params.constraint;
    let alpha_driver = params.alpha.clone();
    let driver: crate::coefficients::FullCoefficientFn = Arc::new(move |t, x, _, z| {
        -indifference_driver_value(z, alpha_driver(t, x), gamma, &cset)
    });
    let alpha_dz = params.alpha.clone();
    let f_z: crate::coefficients::FullCoefficientFn = Arc::new(move |t, x, _, z| {
        -indifference_driver_dz(z, alpha_dz(t, x), gamma, &cset)
    });

    // Growth constant from probed coefficient magnitudes on a wide slab.
    let mut sup_f0: f64 = 0.0;
    for m in 0..=16 {
        let t = params.horizon * m as f64 / 16.0;
        for j in 0..=400 {
            let x = params.x0 - 10.0 + 20.0 * j as f64 / 400.0;
            sup_f0 = sup_f0.max(driver(t, x, 0.0, 0.0).abs());
        }
    }
    let sup_payoff = probe_sup_abs(&params.payoff, params.x0 - 10.0, params.x0 + 10.0, 2001);
    let growth_lambda = sup_f0.max(sup_payoff).max(1.0);

    let base_derivatives = OptionalDerivatives {
        f_y: Some(Arc::new(|_, _, _, _| 0.0)),
        f_z: Some(f_z),
        f_yy: Some(Arc::new(|_, _, _, _| 0.0)),
        f_yz: Some(Arc::new(|_, _, _, _| 0.0)),
        b_x: if degenerate_switch {
            Some(Arc::new(|_, _, _, _| 0.0))
        } else {
            None
        },
        b_y: Some(Arc::new(|_, _, _, _| 0.0)),
        b_z: Some(Arc::new(|_, _, _, _| 0.0)),
        sigma_t: Some(constant_ts(0.0)),
        sigma_x: Some(constant_ts(0.0)),
        sigma_xx: Some(constant_ts(0.0)),
        ..OptionalDerivatives::default()
    };

    let make = |terminal: ScalarFn,
                phi_prime: Option<ScalarFn>,
                phi_second: Option<ScalarFn>,
                phi_flag: Smoothness,
                label: &str| {
        let mut derivatives = base_derivatives.clone();
        derivatives.phi_prime = phi_prime;
        derivatives.phi_second = phi_second;
        let coefficients = CoefficientSet {
            drift_b: drift.clone(),
            diffusion_sigma: {
                let s = params.sigma;
                constant_ts(s)
            },
            driver_f: driver.clone(),
            terminal_phi: terminal,
            growth_lambda,
            ellipticity_lambda: params.sigma * params.sigma,
            lipschitz_k: 0.0,
            holder_exponents: HolderExponents::lipschitz(),
            ell: constant(gamma.max(1.0)),
            smoothness_flags: SmoothnessFlags {
                drift_b: if degenerate_switch {
                    Smoothness::C2
                } else {
                    Smoothness::Measurable
                },
                diffusion_sigma: Smoothness::C2,
                driver_f: Smoothness::C1,
                terminal_phi: phi_flag,
            },
            derivatives,
            sign_converted: true,
            notes: format!(
                "pricing pair ({label}): forward drift -(lambda switch + sigma^2/2), driver is \
                 the negated indifference generator (converted from the Y = xi - int f - int Z dW \
                 source convention); gamma={gamma}, sigma={}",
                params.sigma
            ),
        };
        ModelInstance::new(coefficients, params.x0, params.horizon, 0.0)
    };

    let zero_model = make(
        constant(0.0),
        Some(constant(0.0)),
        Some(constant(0.0)),
        Smoothness::C2,
        "zero terminal",
    )?;
    let payoff_model = make(
        params.payoff.clone(),
        params.payoff_prime.clone(),
        None,
        Smoothness::Lipschitz,
        "payoff terminal",
    )?;
    Ok((zero_model, payoff_model))
}
