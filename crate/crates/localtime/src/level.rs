//! Occupation-density estimates of level local times.
//!
//! The local time of `X` at level `R` over `[0, T]` is estimated by the
//! band-occupation quotient
//!
//! ```text
//! L̂ = (2ε)⁻¹ · Σ_m 1{|X_m − R| < ε} · σ²(t_m, X_m) · dt,
//! ```
//!
//! the time spent in an `ε`-band around `R`, weighted by the quadratic
//! variation density and normalized by the band width. For Brownian
//! motion at its own starting level the exact mean is `√(2T/π)`. The
//! band bias is `O(ε²)` and the mesh bias `O(√dt)`, so the default band
//! half-width `dt^0.4` sits between the `√dt` noise floor and the O(1)
//! spatial scale: wide enough that a path cannot cross the band between
//! consecutive nodes unseen, narrow enough to resolve the level.

use rayon::prelude::*;

use fbsde_core::{stats, Grid};
use fbsde_paths::PathEnsemble;

use crate::{EstimatorKind, LocalTimeResult};

/// Default band half-width for occupation estimates: `dt^0.4`.
pub fn default_epsilon(dt: f64) -> f64 {
    dt.powf(0.4)
}

/// Occupation-density local time of a single path at `level`, using the
/// band half-width `epsilon`. Nonnegative by construction.
///
/// `x` holds the path states at every time node of `grid`; `sigma` is
/// the diffusion coefficient the path was simulated with (its square
/// converts occupation time into local time).
pub fn level_local_time<S>(
    x: &[f64],
    grid: &Grid,
    level: f64,
    epsilon: f64,
    sigma: &S,
) -> LocalTimeResult
where
    S: Fn(f64, f64) -> f64,
{
    assert_eq!(
        x.len(),
        grid.n_time_nodes(),
        "path length must match the time axis"
    );
    assert!(epsilon > 0.0, "band half-width must be positive");
    let dt = grid.dt();
    let mut occupation = 0.0;
    for (m, &xm) in x.iter().take(grid.n_time_steps).enumerate() {
        if (xm - level).abs() < epsilon {
            let s = sigma(grid.t_node(m), xm);
            occupation += s * s * dt;
        }
    }
    LocalTimeResult {
        value: occupation / (2.0 * epsilon),
        estimator: EstimatorKind::Occupation,
        epsilon: Some(epsilon),
        dt,
        standard_error: None,
    }
}

/// Ensemble mean of the occupation-density estimator with its Monte
/// Carlo standard error.
pub fn level_local_time_mean<S>(
    ensemble: &PathEnsemble,
    level: f64,
    epsilon: f64,
    sigma: &S,
) -> LocalTimeResult
where
    S: Fn(f64, f64) -> f64 + Sync,
{
    let grid = ensemble.grid;
    let per_path: Vec<f64> = (0..ensemble.n_paths)
        .into_par_iter()
        .map(|p| level_local_time(ensemble.path_x(p), &grid, level, epsilon, sigma).value)
        .collect();
    LocalTimeResult {
        value: stats::mean(&per_path),
        estimator: EstimatorKind::Occupation,
        epsilon: Some(epsilon),
        dt: grid.dt(),
        standard_error: Some(stats::standard_error(&per_path)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fbsde_paths::simulate_forward;

    const UNIT: fn(f64, f64) -> f64 = |_, _| 1.0;

    #[test]
    fn path_pinned_at_the_level_accrues_full_occupation() {
        let grid = Grid::new(0.0, 2.0, 64, -5.0, 5.0, 8).unwrap();
        let x = vec![0.7; grid.n_time_nodes()];
        let r = level_local_time(&x, &grid, 0.7, 0.1, &UNIT);
        // Every left endpoint is in the band: occupation = T, estimate T/(2ε).
        assert!((r.value - 2.0 / 0.2).abs() < 1e-12, "value {}", r.value);
        assert_eq!(r.estimator, EstimatorKind::Occupation);
        assert_eq!(r.epsilon, Some(0.1));
        assert!(r.standard_error.is_none());
    }

    #[test]
    fn path_clear_of_the_band_accrues_exactly_zero() {
        let grid = Grid::new(0.0, 1.0, 32, -5.0, 5.0, 8).unwrap();
        let x: Vec<f64> = (0..grid.n_time_nodes()).map(|m| 2.0 + 0.01 * m as f64).collect();
        let r = level_local_time(&x, &grid, -1.0, 0.25, &UNIT);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn diffusion_scale_enters_quadratically() {
        let grid = Grid::new(0.0, 1.0, 16, -5.0, 5.0, 8).unwrap();
        let x = vec![0.0; grid.n_time_nodes()];
        let half = level_local_time(&x, &grid, 0.0, 0.2, &|_, _| 0.5).value;
        let unit = level_local_time(&x, &grid, 0.0, 0.2, &UNIT).value;
        assert!((half - 0.25 * unit).abs() < 1e-12);
    }

    #[test]
    fn ensemble_mean_is_nonnegative_and_carries_standard_error() {
        let grid = Grid::new(0.0, 1.0, 128, -8.0, 8.0, 8).unwrap();
        let e = simulate_forward(&|_, _| 0.0, &UNIT, 0.2, &grid, 400, 7);
        let r = level_local_time_mean(&e, 0.2, default_epsilon(grid.dt()), &UNIT);
        assert!(r.value >= 0.0);
        assert!(r.standard_error.unwrap() > 0.0);
    }
}
