//! Integration-by-parts density recovery.
//!
//! For a functional `F` with Malliavin derivative `D_s F` whose time
//! integral is almost surely separated from zero, the density admits the
//! exponential representation
//!
//! ```text
//! ρ_F(x) = ρ_F(x₀) · exp(−∫_{x₀}^x w(z) dz),
//! w(z)   = E[ δ( (∫₀ᵀ D_s F ds)⁻¹ ) | F = z ],
//! ```
//!
//! where `δ` is the anticipative (Skorohod) integral. For the constant-
//! in-time integrand `c := (∫₀ᵀ D_s F ds)⁻¹` the integral evaluates in
//! closed form,
//!
//! ```text
//! δ(c·1_{[0,T]}) = c·W_T − ∫₀ᵀ D_s c ds,
//! D_s c          = −c²·∫₀ᵀ D_s D_u F du,
//! ```
//!
//! so each path contributes the scalar `δ = c·W_T + c²·∬ D_s D_u F du ds`.
//! The conditional expectation is estimated by equal-count bin regression
//! of `δ` on `F`, the exponent is integrated by the trapezoid rule from
//! the sample median, and the curve is normalised to unit mass over the
//! probe grid — the anchor value `ρ_F(x₀)` is fixed by normalisation, not
//! by a second estimator.

use serde::Serialize;

use fbsde_core::binning::equal_count_regression;
use fbsde_core::interp::linear_interp;
use fbsde_core::stats::percentile;
use fbsde_malliavin::{MalliavinSample, SecondOrderSample};

use crate::estimate::{probe_grid_for, trapezoid, BandwidthRule};
use crate::{DensityError, DensityEstimate, DensityEstimator};

/// Exponent clamp keeping the unnormalised curve inside `f64` range.
const EXPONENT_CLAMP: f64 = 700.0;

/// Density reconstructed from the anticipative-integral representation.
#[derive(Debug, Clone, Serialize)]
pub struct SkorohodDensity {
    /// Normalised density on the probe grid.
    pub density: DensityEstimate,
    /// The drift-of-log-density `w` on the same grid.
    pub w_values: Vec<f64>,
    /// Conditioning-bin centres of the regression.
    pub regression_centers: Vec<f64>,
    /// Conditional means of `δ` per bin.
    pub regression_means: Vec<f64>,
    /// Integration anchor (the sample median).
    pub anchor: f64,
    /// Number of regression bins.
    pub n_bins: usize,
}

/// Reconstructs a density from per-path Malliavin data.
///
/// * `f_samples` — the functional per path;
/// * `terminal_noise` — `W_T` per path (sum of the driving increments);
/// * `df_integral` — `∫₀ᵀ D_s F ds` per path;
/// * `ddf_double_integral` — `∬ D_s D_u F du ds` per path, `Some` even
///   when identically zero: omitting it means the correction term cannot
///   be formed and is an error, not a silent assumption.
///
/// The regression uses `n_bins` equal-count bins (50 is the convention
/// elsewhere in the workspace).
pub fn skorohod_density_representation(
    f_samples: &[f64],
    terminal_noise: &[f64],
    df_integral: &[f64],
    ddf_double_integral: Option<&[f64]>,
    n_bins: usize,
) -> Result<SkorohodDensity, DensityError> {
    let n = f_samples.len();
    assert_eq!(terminal_noise.len(), n, "terminal noise shape");
    assert_eq!(df_integral.len(), n, "derivative integral shape");
    let ddf = ddf_double_integral.ok_or_else(|| {
        DensityError::MissingSecondDerivatives(
            "the anticipative integral needs ∬ D_s D_u F du ds per path; pass zeros \
             explicitly when the second derivative vanishes"
                .into(),
        )
    })?;
    assert_eq!(ddf.len(), n, "second derivative integral shape");

    let degenerate = df_integral.iter().filter(|d| d.abs() < 1e-12).count();
    if degenerate > 0 {
        return Err(DensityError::Degenerate(format!(
            "Malliavin covariance integral vanishes on {degenerate} of {n} paths; \
             the representation divides by it"
        )));
    }

    let delta: Vec<f64> = (0..n)
        .map(|p| {
            let c = 1.0 / df_integral[p];
            c * terminal_noise[p] + c * c * ddf[p]
        })
        .collect();

    let regression = equal_count_regression(f_samples, &delta, n_bins)
        .map_err(|e| DensityError::Degenerate(e.to_string()))?;

    let (probe_grid, bandwidth) = probe_grid_for(f_samples, BandwidthRule::Silverman)?;
    let w_values: Vec<f64> = probe_grid
        .iter()
        .map(|&x| regression.interpolate(x))
        .collect();

    // Cumulative ∫ w from the left grid end, then re-anchor at the median.
    let mut cumulative = vec![0.0; probe_grid.len()];
    for i in 1..probe_grid.len() {
        cumulative[i] = cumulative[i - 1]
            + 0.5 * (w_values[i] + w_values[i - 1]) * (probe_grid[i] - probe_grid[i - 1]);
    }
    let anchor =
        percentile(f_samples, 50.0).map_err(|e| DensityError::Degenerate(e.to_string()))?;
    let at_anchor = linear_interp(&probe_grid, &cumulative, anchor);
    let unnormalised: Vec<f64> = cumulative
        .iter()
        .map(|&c| (-(c - at_anchor).clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)).exp())
        .collect();
    let mass = trapezoid(&probe_grid, &unnormalised);
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(DensityError::Degenerate(format!(
            "representation mass {mass} cannot be normalised"
        )));
    }
    let values: Vec<f64> = unnormalised.iter().map(|v| v / mass).collect();

    Ok(SkorohodDensity {
        density: DensityEstimate {
            probe_grid,
            values,
            bandwidth,
            n_samples: n,
            estimator: DensityEstimator::Representation,
        },
        w_values,
        regression_centers: regression.bin_centers,
        regression_means: regression.bin_means,
        anchor,
        n_bins,
    })
}

/// `∫₀^t D_s F ds` per path from a tabulated first-derivative sample, by
/// the left rule over the `s` nodes below the target node.
pub fn malliavin_first_integral(sample: &MalliavinSample, t_node: usize) -> Vec<f64> {
    let dt = sample.grid.dt();
    (0..sample.n_paths)
        .map(|p| {
            let mut acc = 0.0;
            for s in 0..t_node {
                acc += sample.dx(p, s, t_node);
            }
            acc * dt
        })
        .collect()
}

/// `∬ D_{s'} D_s F ds' ds` per path from the coarse second-derivative
/// table, at the final retained time node. Off-diagonal mass is doubled
/// (the second derivative is symmetric in its two lower arguments) and
/// each retained node carries the coarse cell width.
pub fn malliavin_double_integral(second: &SecondOrderSample) -> Vec<f64> {
    let nodes = &second.coarse_nodes;
    let cn = nodes.len();
    assert!(cn >= 2, "need at least two coarse nodes");
    let c = cn - 1;
    let dt = second.grid.dt();
    // Average spacing of the retained nodes, in time units.
    let h = (nodes[c] - nodes[0]) as f64 * dt / (cn - 1) as f64;
    (0..second.n_paths)
        .map(|p| {
            let mut acc = 0.0;
            for a in 0..cn {
                for b in a..cn {
                    let v = second.ddx(p, a, b, c);
                    acc += if a == b { v } else { 2.0 * v };
                }
            }
            acc * h * h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_samples(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    }

    #[test]
    fn missing_second_derivatives_is_an_error() {
        let f = normal_samples(2000, 1.0, 1);
        let df = vec![1.0; 2000];
        assert!(matches!(
            skorohod_density_representation(&f, &f, &df, None, 20),
            Err(DensityError::MissingSecondDerivatives(_))
        ));
    }

    #[test]
    fn vanishing_covariance_is_degenerate() {
        let f = normal_samples(2000, 1.0, 2);
        let mut df = vec![1.0; 2000];
        df[7] = 0.0;
        let dd = vec![0.0; 2000];
        assert!(matches!(
            skorohod_density_representation(&f, &f, &df, Some(&dd), 20),
            Err(DensityError::Degenerate(_))
        ));
    }

    #[test]
    fn constant_functional_cannot_be_conditioned_on() {
        let f = vec![1.0; 2000];
        let w = normal_samples(2000, 1.0, 3);
        let df = vec![1.0; 2000];
        let dd = vec![0.0; 2000];
        assert!(matches!(
            skorohod_density_representation(&f, &w, &df, Some(&dd), 20),
            Err(DensityError::Degenerate(_))
        ));
    }

    #[test]
    fn recovered_density_is_normalised_and_nonnegative() {
        let t: f64 = 1.0;
        let f = normal_samples(50_000, t.sqrt(), 4);
        let df = vec![t; f.len()];
        let dd = vec![0.0; f.len()];
        let rep = skorohod_density_representation(&f, &f, &df, Some(&dd), 50).unwrap();
        assert_eq!(rep.density.estimator, DensityEstimator::Representation);
        let mass = rep.density.mass();
        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
        assert!(rep.density.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn gaussian_chain_recovers_the_linear_drift_of_log_density() {
        // F = W_T: c = 1/T and δ = W_T/T exactly, so the fitted w must sit
        // on the line z/T at every bin centre up to Monte Carlo noise.
        let t: f64 = 1.0;
        let f = normal_samples(200_000, t.sqrt(), 5);
        let df = vec![t; f.len()];
        let dd = vec![0.0; f.len()];
        let rep = skorohod_density_representation(&f, &f, &df, Some(&dd), 50).unwrap();
        for (c, m) in rep
            .regression_centers
            .iter()
            .zip(&rep.regression_means)
            .filter(|(c, _)| c.abs() < 2.0)
        {
            assert!(
                (m - c / t).abs() < 0.05,
                "w({c}) = {m}, expected {}",
                c / t
            );
        }
    }
}
