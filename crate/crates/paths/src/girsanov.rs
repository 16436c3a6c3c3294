//! Change-of-measure weights along retained paths.
//!
//! For a bounded drift `θ(t, x)` the stochastic exponential
//!
//! ```text
//! E_T = exp( ∫_0^T θ(t, X_t) dW_t − ½ ∫_0^T θ(t, X_t)² dt )
//! ```
//!
//! has unit expectation and reweights the ensemble onto the law in
//! which `W_t − ∫ θ ds` is a Brownian motion. The discrete weight
//! freezes `θ` at the left endpoint of every step, matching the
//! simulation scheme, so a drift absorbed by reweighting is removed to
//! the same order it was introduced.

use rayon::prelude::*;

use crate::ensemble::PathEnsemble;

/// Per-path stochastic-exponential weights for `drift`, in path order.
///
/// `weight[p] = exp( Σ_m θ(t_m, X[p][m])·dW[p][m] − ½ Σ_m θ(t_m, X[p][m])²·dt )`.
pub fn girsanov_weight<D>(ensemble: &PathEnsemble, drift: &D) -> Vec<f64>
where
    D: Fn(f64, f64) -> f64 + Sync,
{
    let grid = ensemble.grid;
    let dt = grid.dt();
    let steps = grid.n_time_steps;
    (0..ensemble.n_paths)
        .into_par_iter()
        .map(|p| {
            let x = ensemble.path_x(p);
            let dw = ensemble.path_dw(p);
            let mut log_weight = 0.0;
            for m in 0..steps {
                let theta = drift(grid.t_node(m), x[m]);
                log_weight += theta * dw[m] - 0.5 * theta * theta * dt;
            }
            log_weight.exp()
        })
        .collect()
}
