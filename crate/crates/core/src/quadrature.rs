//! Gauss–Hermite quadrature for Gaussian expectations.
//!
//! Nodes and weights are generated for the weight `exp(-u^2)` by Newton
//! iteration on the orthonormal Hermite three-term recurrence, so no table
//! lookup is needed and any order is available. The main consumer is the
//! independent reference solution for the constant-coefficient value field,
//! which is a heat-semigroup average of the terminal condition.

use thiserror::Error;

use crate::scalar::Real;

/// Errors from quadrature rule construction.
#[derive(Debug, Error)]
pub enum QuadratureError {
    /// Zero-point rule requested.
    #[error("quadrature order must be positive")]
    ZeroOrder,
    /// Newton iteration failed to locate a root (should not happen for
    /// moderate orders; guards against silent precision loss).
    #[error("node search failed to converge at root {0}")]
    NodeSearchFailed(usize),
}

/// A Gauss–Hermite rule: `∫ g(u) e^{-u^2} du ≈ Σ w_i g(u_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    /// Quadrature nodes in increasing order.
    pub nodes: Vec<T>,
    /// Positive weights summing to `sqrt(pi)`.
    pub weights: Vec<T>,
}

/// Evaluates the exponentially scaled orthonormal Hermite polynomial
/// `s_n(u) = h_n(u) exp(-u^2 / 2)`, its derivative, and `s_{n-1}(u)`.
///
/// The scaling keeps every value bounded by O(1) at any order, where the raw
/// polynomials overflow `f64` near the extreme roots once `n` reaches a few
/// hundred. The scaled function has the same roots as `h_n`, so Newton
/// iteration is unchanged.
fn scaled_hermite<T: Real>(n: usize, u: T) -> (T, T, T) {
    // s_0 = pi^{-1/4} e^{-u^2/2}, s_1 = sqrt(2) u s_0, and the three-term
    // recurrence s_{k+1} = sqrt(2/(k+1)) u s_k - sqrt(k/(k+1)) s_{k-1} is
    // identical to the unscaled one (the common factor cancels).
    let mut s_prev = T::of(std::f64::consts::PI.powf(-0.25)) * (-u * u / T::of(2.0)).exp();
    if n == 0 {
        return (s_prev, -u * s_prev, T::zero());
    }
    let mut s = T::of(2.0).sqrt() * u * s_prev;
    for k in 1..n {
        let kf = T::of_usize(k);
        let next = (T::of(2.0) / (kf + T::one())).sqrt() * u * s
            - (kf / (kf + T::one())).sqrt() * s_prev;
        s_prev = s;
        s = next;
    }
    // d/du [h_n e^{-u^2/2}] = sqrt(2n) s_{n-1} - u s_n.
    let deriv = (T::of(2.0) * T::of_usize(n)).sqrt() * s_prev - u * s;
    (s, deriv, s_prev)
}

impl<T: Real> GaussHermite<T> {
    /// Builds an `n`-point rule.
    ///
    /// Supported up to a few hundred points at `f64` (verified through
    /// `n = 512`); past that the scaled polynomial itself underflows at the
    /// extreme initial guesses and the constructor reports
    /// [`QuadratureError::NodeSearchFailed`] rather than returning corrupt
    /// nodes.
    pub fn new(n: usize) -> Result<Self, QuadratureError> {
        if n == 0 {
            return Err(QuadratureError::ZeroOrder);
        }
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        // Work on the upper half; nodes are symmetric about zero.
        for i in 0..(n + 1) / 2 {
            // Initial guesses (classical asymptotics for Hermite roots).
            let mut u = if i == 0 {
                T::of((2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0))
            } else if i == 1 {
                let prev = nodes[n - 1].as_f64();
                T::of(prev - 1.14 * nf.powf(0.426) / prev)
            } else if i == 2 {
                T::of(1.86 * nodes[n - 2].as_f64() - 0.86 * nodes[n - 1].as_f64())
            } else if i == 3 {
                T::of(1.91 * nodes[n - 3].as_f64() - 0.91 * nodes[n - 2].as_f64())
            } else {
                T::of(2.0 * nodes[n - i].as_f64() - nodes[n - i + 1].as_f64())
            };
            // Newton iteration on the scaled polynomial; the stopping
            // threshold scales with the working precision so the same code
            // serves f32 and f64.
            let tol = T::epsilon() * T::of(4.0);
            let mut converged = false;
            for _ in 0..100 {
                let (s, ds, _) = scaled_hermite(n, u);
                let step = s / ds;
                u = u - step;
                if step.abs() <= u.abs().max(T::one()) * tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(QuadratureError::NodeSearchFailed(i));
            }
            // Classical weight 2 / h_n'(u)^2 with h_n' = sqrt(2n) h_{n-1},
            // evaluated through the scaled values:
            // w = e^{-u^2} / (n s_{n-1}^2). Extreme-node weights below the
            // smallest positive float underflow to zero, which is the
            // correct contribution at working precision.
            let (_, _, s_low) = scaled_hermite(n, u);
            nodes[n - 1 - i] = u;
            nodes[i] = -u;
            let w = (-u * u).exp() / (T::of_usize(n) * s_low * s_low);
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Ok(Self { nodes, weights })
    }

    /// Gaussian expectation `E[g(mean + sqrt(variance) N)]`, `N ~ N(0,1)`.
    pub fn gaussian_expectation(&self, mean: T, variance: T, mut g: impl FnMut(T) -> T) -> T {
        let scale = (T::of(2.0) * variance).sqrt();
        let inv_sqrt_pi = T::of(std::f64::consts::PI).sqrt().recip();
        let mut acc = T::zero();
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * g(mean + scale * *u);
        }
        acc * inv_sqrt_pi
    }
}

/// Heat-semigroup average `E[g(x + drift_shift + N(0, variance))]` with a
/// fixed high-order rule; the workhorse behind closed-form reference fields.
pub fn heat_semigroup_average<T: Real>(
    rule: &GaussHermite<T>,
    x: T,
    drift_shift: T,
    variance: T,
    g: impl FnMut(T) -> T,
) -> T {
    rule.gaussian_expectation(x + drift_shift, variance, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 16, 33, 64, 80] {
            let rule: GaussHermite<f64> = GaussHermite::new(n).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!(
                (total - std::f64::consts::PI.sqrt()).abs() < 1e-12,
                "n={n}: {total}"
            );
        }
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // An n-point rule is exact for polynomials of degree 2n-1; check
        // Gaussian moments E[N^k] for N ~ N(0,1).
        let rule: GaussHermite<f64> = GaussHermite::new(12).unwrap();
        let exact = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0];
        for (k, want) in exact.iter().enumerate() {
            let got = rule.gaussian_expectation(0.0, 1.0, |u| u.powi(k as i32));
            assert!((got - want).abs() < 1e-10, "moment {k}: {got} vs {want}");
        }
    }

    #[test]
    fn lognormal_mean() {
        // E[exp(mu + sigma N)] = exp(mu + sigma^2/2).
        let rule: GaussHermite<f64> = GaussHermite::new(40).unwrap();
        let got = rule.gaussian_expectation(0.3, 0.49, f64::exp);
        let want = (0.3f64 + 0.49 / 2.0).exp();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn bounded_nonsmooth_integrand_converges() {
        // Logistic terminal data: the reference-field integrand.
        let phi = |x: f64| x.exp() / (1.0 + x.exp());
        let coarse: GaussHermite<f64> = GaussHermite::new(48).unwrap();
        let fine: GaussHermite<f64> = GaussHermite::new(96).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let a = heat_semigroup_average(&coarse, x, 0.7, 0.7, phi);
            let b = heat_semigroup_average(&fine, x, 0.7, 0.7, phi);
            assert!((a - b).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let rule: GaussHermite<f64> = GaussHermite::new(21).unwrap();
        for i in 1..rule.nodes.len() {
            assert!(rule.nodes[i] > rule.nodes[i - 1]);
        }
        for i in 0..rule.nodes.len() {
            let j = rule.nodes.len() - 1 - i;
            assert!((rule.nodes[i] + rule.nodes[j]).abs() < 1e-12);
            assert!((rule.weights[i] - rule.weights[j]).abs() < 1e-14);
        }
        assert_eq!(rule.nodes[10], 0.0);
    }

    #[test]
    fn works_at_f32() {
        let rule: GaussHermite<f32> = GaussHermite::new(8).unwrap();
        let got = rule.gaussian_expectation(0.0f32, 1.0, |u| u * u);
        assert!((got - 1.0).abs() < 1e-5);
    }
}
