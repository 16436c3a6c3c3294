//! Equal-count bin regression for conditional expectations.
//!
//! Several diagnostics estimate `E[G | F = z]` from Monte Carlo pairs
//! `(F_i, G_i)`: the integration-by-parts density representation and the
//! empirical Malliavin covariance envelopes both reduce to this. Sorting by
//! the conditioning variable and averaging the response over contiguous
//! equal-count chunks gives a simple, tuning-free estimator whose per-bin
//! noise is uniform in the sample size.

use thiserror::Error;

use crate::interp::linear_interp;
use crate::scalar::Real;

/// Errors from conditional-expectation binning.
#[derive(Debug, Error)]
pub enum BinningError {
    /// Conditioning and response vectors differ in length.
    #[error("binning input mismatch: {0} conditioning values vs {1} responses")]
    ShapeMismatch(usize, usize),
    /// Not enough samples to fill the requested bins, or the conditioning
    /// variable does not vary at all.
    #[error("degenerate bins: {0}")]
    DegenerateBins(String),
}

/// Conditional-expectation estimate on equal-count bins.
#[derive(Debug, Clone)]
pub struct BinnedRegression<T> {
    /// Mean of the conditioning variable within each bin (ascending).
    pub bin_centers: Vec<T>,
    /// Conditional mean of the response within each bin.
    pub bin_means: Vec<T>,
    /// Number of samples in each bin (sizes differ by at most one).
    pub bin_counts: Vec<usize>,
}

impl<T: Real> BinnedRegression<T> {
    /// Evaluates the regression at `z` by linear interpolation between bin
    /// centers, clamped to the outermost centers.
    pub fn interpolate(&self, z: T) -> T {
        linear_interp(&self.bin_centers, &self.bin_means, z)
    }
}

/// Estimates `E[response | conditioning]` on `n_bins` equal-count bins.
///
/// Requires at least two samples per bin so every conditional mean is an
/// actual average.
pub fn equal_count_regression<T: Real>(
    conditioning: &[T],
    response: &[T],
    n_bins: usize,
) -> Result<BinnedRegression<T>, BinningError> {
    let n = conditioning.len();
    if n != response.len() {
        return Err(BinningError::ShapeMismatch(n, response.len()));
    }
    if n_bins == 0 || n < 2 * n_bins {
        return Err(BinningError::DegenerateBins(format!(
            "{n} samples cannot fill {n_bins} bins with at least 2 samples each"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        conditioning[a]
            .partial_cmp(&conditioning[b])
            .expect("non-finite conditioning value")
    });
    let span = conditioning[order[n - 1]] - conditioning[order[0]];
    if !(span > T::zero()) {
        return Err(BinningError::DegenerateBins(
            "conditioning variable is constant".into(),
        ));
    }

    let base = n / n_bins;
    let extra = n % n_bins;
    let mut bin_centers = Vec::with_capacity(n_bins);
    let mut bin_means = Vec::with_capacity(n_bins);
    let mut bin_counts = Vec::with_capacity(n_bins);
    let mut start = 0usize;
    for k in 0..n_bins {
        let size = base + usize::from(k < extra);
        let chunk = &order[start..start + size];
        let mut cf = T::zero();
        let mut cg = T::zero();
        for &idx in chunk {
            cf += conditioning[idx];
            cg += response[idx];
        }
        let sf = T::of_usize(size);
        bin_centers.push(cf / sf);
        bin_means.push(cg / sf);
        bin_counts.push(size);
        start += size;
    }
    Ok(BinnedRegression {
        bin_centers,
        bin_means,
        bin_counts,
    })
}
