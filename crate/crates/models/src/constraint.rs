//! Closed constraint intervals and the exponential-utility driver formula.
//!
//! The projection Π_C and distance dist_C onto a closed interval C (possibly
//! unbounded on either side) are the only pieces of convex analysis the
//! pricing application needs. The driver
//!
//! ```text
//! f(t, x, z) = −(γ/2) dist_C(z + α/γ)² + z α + α²/(2γ)
//! ```
//!
//! is the generator of the utility-indifference backward equation with risk
//! aversion γ and market price of risk α. It lives here, next to the model
//! constructors that embed it, so the pricing crate can delegate to one
//! definition.

use serde::{Deserialize, Serialize};

use crate::coefficients::ModelError;

/// A closed interval `[lower, upper]`, with infinite endpoints allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintInterval {
    /// Lower endpoint (may be `-inf`).
    pub lower: f64,
    /// Upper endpoint (may be `+inf`).
    pub upper: f64,
}

impl ConstraintInterval {
    /// Builds the interval, rejecting `lower > upper` and NaN endpoints.
    pub fn new(lower: f64, upper: f64) -> Result<Self, ModelError> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// The whole real line (unconstrained).
    pub fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// The half line `[0, ∞)` (no short positions).
    pub fn nonnegative() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    /// Euclidean projection onto the interval (a clamp).
    pub fn project(&self, a: f64) -> f64 {
        a.max(self.lower).min(self.upper)
    }

    /// Distance from `a` to the interval, `|a − Π_C(a)|`.
    pub fn distance(&self, a: f64) -> f64 {
        (a - self.project(a)).abs()
    }
}

/// The indifference-pricing generator
/// `f = −(γ/2) dist_C(z + α/γ)² + z α + α²/(2γ)`.
///
/// This is the driver in the convention where the backward equation reads
/// `Y_s = ξ − ∫ f du − ∫ Z dW`; models stored in the laboratory's
/// `dY = −f̄ dt + Z dW` convention embed `f̄ = −f`.
pub fn indifference_driver_value(
    z: f64,
    alpha: f64,
    gamma: f64,
    constraint: &ConstraintInterval,
) -> f64 {
    let shifted = z + alpha / gamma;
    let dist = constraint.distance(shifted);
    -(gamma / 2.0) * (dist * dist) + z * alpha + alpha * alpha / (2.0 * gamma)
}

/// Partial derivative of [`indifference_driver_value`] in `z`:
/// `∂_z f = −γ (w − Π_C(w)) + α` with `w = z + α/γ`.
///
/// The squared distance is continuously differentiable, so this holds
/// everywhere including the constraint boundary.
pub fn indifference_driver_dz(
    z: f64,
    alpha: f64,
    gamma: f64,
    constraint: &ConstraintInterval,
) -> f64 {
    let shifted = z + alpha / gamma;
    -gamma * (shifted - constraint.project(shifted)) + alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_cases() {
        let real = ConstraintInterval::real_line();
        assert_eq!(real.project(-3.5), -3.5);
        assert_eq!(real.distance(-3.5), 0.0);

        let half = ConstraintInterval::nonnegative();
        assert_eq!(half.project(-1.0), 0.0);
        assert_eq!(half.distance(-1.0), 1.0);
        assert_eq!(half.project(2.0), 2.0);

        let unit = ConstraintInterval::new(0.0, 1.0).unwrap();
        assert_eq!(unit.project(2.0), 1.0);
        assert_eq!(unit.distance(2.0), 1.0);
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let c = ConstraintInterval::new(-1.0, 2.0).unwrap();
        for k in -40..40 {
            let a = k as f64 * 0.25;
            let p = c.project(a);
            assert_eq!(c.project(p), p);
            for j in -40..40 {
                let b = j as f64 * 0.25;
                assert!((c.project(a) - c.project(b)).abs() <= (a - b).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(matches!(
            ConstraintInterval::new(1.0, 0.0),
            Err(ModelError::InvalidInterval { .. })
        ));
        assert!(ConstraintInterval::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn unconstrained_driver_drops_distance_term() {
        let real = ConstraintInterval::real_line();
        for z in [-2.0, -0.5, 0.0, 1.3] {
            let f = indifference_driver_value(z, 0.7, 2.0, &real);
            assert!((f - (z * 0.7 + 0.49 / 4.0)).abs() < 1e-15);
        }
    }

    /// Pinned reference value: γ = 1, α = 0.2, C = [0, ∞), z = −1 gives
    /// w = −0.8, dist² = 0.64, f = −0.32 − 0.2 + 0.02 = −0.5. The
    /// evaluation must land on −0.5 exactly in 64-bit arithmetic.
    #[test]
    fn pinned_half_line_value_is_exact() {
        let half = ConstraintInterval::nonnegative();
        let f = indifference_driver_value(-1.0, 0.2, 1.0, &half);
        assert_eq!(f, -0.5);
    }

    #[test]
    fn interior_point_matches_unconstrained() {
        let c = ConstraintInterval::new(-10.0, 10.0).unwrap();
        let real = ConstraintInterval::real_line();
        let f1 = indifference_driver_value(0.3, 0.5, 1.5, &c);
        let f2 = indifference_driver_value(0.3, 0.5, 1.5, &real);
        assert_eq!(f1, f2);
    }

    #[test]
    fn dz_matches_finite_difference() {
        let c = ConstraintInterval::nonnegative();
        for z in [-2.0, -0.81, -0.2, 0.0, 1.0] {
            let h = 1e-6;
            let fd = (indifference_driver_value(z + h, 0.2, 1.0, &c)
                - indifference_driver_value(z - h, 0.2, 1.0, &c))
                / (2.0 * h);
            let an = indifference_driver_dz(z, 0.2, 1.0, &c);
            assert!((fd - an).abs() < 1e-5, "z={z}: {fd} vs {an}");
        }
    }

    #[test]
    fn quadratic_growth_bound() {
        // |f| ≤ C (1 + z²) with C from sup|α| and γ.
        let c = ConstraintInterval::nonnegative();
        let (gamma, alpha) = (1.5f64, 0.4f64);
        let cap = gamma / 2.0 + alpha.abs() + alpha * alpha / (2.0 * gamma) + alpha * alpha;
        for k in -100..100 {
            let z = k as f64 * 0.1;
            let f = indifference_driver_value(z, alpha, gamma, &c).abs();
            assert!(
                f <= (1.0 + cap) * (1.0 + z * z) * 2.0,
                "z={z}: f={f}"
            );
        }
    }
}
