//! Interpolation of gridded fields along simulated paths.
//!
//! Spatial interpolation uses a monotone piecewise-cubic Hermite scheme
//! (Fritsch–Carlson slope limiting), which preserves monotone data — the
//! property that keeps interpolated value fields comparison-consistent
//! between ordered terminal conditions. Temporal interpolation is linear;
//! paths are simulated on the same time axis as the fields, so temporal
//! interpolation only smooths off-node queries.

use thiserror::Error;

use crate::scalar::Real;

/// Errors from interpolant construction.
#[derive(Debug, Error)]
pub enum InterpError {
    /// Node and value arrays disagree in length, or fewer than two nodes.
    #[error("interpolation input mismatch: {0}")]
    ShapeMismatch(String),
    /// Nodes are not strictly increasing.
    #[error("interpolation nodes must be strictly increasing near index {0}")]
    UnsortedNodes(usize),
}

/// Monotone piecewise-cubic Hermite interpolant on a fixed node vector.
///
/// Limited node slopes make the interpolant monotone on every interval where
/// the data are monotone, and `C^1` globally.
#[derive(Debug, Clone)]
pub struct MonotoneCubic<T> {
    nodes: Vec<T>,
    values: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    /// Fits the interpolant through `(nodes[i], values[i])`.
    pub fn fit(nodes: &[T], values: &[T]) -> Result<Self, InterpError> {
        let n = nodes.len();
        if n != values.len() || n < 2 {
            return Err(InterpError::ShapeMismatch(format!(
                "{} nodes vs {} values",
                n,
                values.len()
            )));
        }
        for i in 1..n {
            if !(nodes[i] > nodes[i - 1]) {
                return Err(InterpError::UnsortedNodes(i));
            }
        }
        // Secant slopes on each interval.
        let secants: Vec<T> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]))
            .collect();
        // Initial node slopes: one-sided at the ends, secant average inside,
        // zeroed across local extrema so monotone pieces stay monotone.
        let mut slopes = vec![T::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            if secants[i - 1] * secants[i] <= T::zero() {
                slopes[i] = T::zero();
            } else {
                slopes[i] = (secants[i - 1] + secants[i]) / T::of(2.0);
            }
        }
        // Fritsch–Carlson limiting: keep (alpha, beta) inside the circle of
        // radius 3 so each cubic piece is monotone.
        let three = T::of(3.0);
        for i in 0..n - 1 {
            if secants[i] == T::zero() {
                slopes[i] = T::zero();
                slopes[i + 1] = T::zero();
                continue;
            }
            let alpha = slopes[i] / secants[i];
            let beta = slopes[i + 1] / secants[i];
            let norm = (alpha * alpha + beta * beta).sqrt();
            if norm > three {
                let scale = three / norm;
                slopes[i] = scale * alpha * secants[i];
                slopes[i + 1] = scale * beta * secants[i];
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            values: values.to_vec(),
            slopes,
        })
    }

    /// Index of the interval containing `x` (clamped to the node range).
    fn bracket(&self, x: T) -> usize {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0;
        }
        if x >= self.nodes[n - 1] {
            return n - 2;
        }
        // Binary search over the sorted nodes.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.nodes[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Evaluates the interpolant at `x` (clamped to the node range).
    pub fn eval(&self, x: T) -> T {
        let i = self.bracket(x);
        let h = self.nodes[i + 1] - self.nodes[i];
        let x = x.max(self.nodes[0]).min(*self.nodes.last().unwrap());
        let s = (x - self.nodes[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::of(2.0);
        let three = T::of(3.0);
        // Cubic Hermite basis.
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1]
    }

    /// Evaluates the derivative of the interpolant at `x`.
    pub fn eval_derivative(&self, x: T) -> T {
        let i = self.bracket(x);
        let h = self.nodes[i + 1] - self.nodes[i];
        let x = x.max(self.nodes[0]).min(*self.nodes.last().unwrap());
        let s = (x - self.nodes[i]) / h;
        let s2 = s * s;
        let two = T::of(2.0);
        let three = T::of(3.0);
        let six = T::of(6.0);
        let four = T::of(4.0);
        let dh00 = (six * s2 - six * s) / h;
        let dh10 = three * s2 - four * s + T::one();
        let dh01 = (-six * s2 + six * s) / h;
        let dh11 = three * s2 - two * s;
        dh00 * self.values[i]
            + dh10 * self.slopes[i]
            + dh01 * self.values[i + 1]
            + dh11 * self.slopes[i + 1]
    }
}

/// Linear interpolation of `values` sampled at `nodes`, clamped outside.
pub fn linear_interp<T: Real>(nodes: &[T], values: &[T], x: T) -> T {
    debug_assert_eq!(nodes.len(), values.len());
    let n = nodes.len();
    if x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if nodes[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (x - nodes[lo]) / (nodes[lo + 1] - nodes[lo]);
    values[lo] * (T::one() - w) + values[lo + 1] * w
}

/// Linear blend `a * (1 - w) + b * w`.
pub fn lerp<T: Real>(a: T, b: T, w: T) -> T {
    a * (T::one() - w) + b * w
}
