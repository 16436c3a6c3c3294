//! Time reversal of Brownian ensembles and the auxiliary martingale
//! increments.
//!
//! For a Brownian path `W` on `[0, T]` the reversed path is
//! `Ŵ_t = W_{T−t}`. Seen through its own filtration, `Ŵ` is a bridge
//! pinned at `Ŵ_T = W_0`: its conditional increment drift is
//! `−Ŵ_t/(T−t)·dt`, the pull toward the pin. Compensating that drift,
//!
//! ```text
//! B_t = Ŵ_t − W_T + ∫_0^t Ŵ_s/(T−s) ds
//! ```
//!
//! is again a Brownian motion (note `B_0 = 0` and `dB_t = dŴ_t +
//! Ŵ_t/(T−t)·dt`). Local-time decompositions integrate against `dB`,
//! so this module tabulates the discrete increments
//!
//! ```text
//! dB[m] = (Ŵ[m+1] − Ŵ[m]) + Ŵ[m]/(T−τ_m)·dt,
//! ```
//!
//! with the integrand frozen at the left endpoint `τ_m` of each
//! sub-interval. The final sub-interval `[T−dt, T]`, where the kernel
//! `1/(T−s)` becomes singular as the mesh refines, is dropped from the
//! stored arrays. Nothing is lost: there `dt/(T−τ) = 1`, so the
//! compensator cancels the entire remaining displacement and the
//! increment collapses to `Ŵ[M] = W_0 − W_0 = 0` identically. The mean
//! absolute size of the dropped increment is still measured and
//! recorded so consumers can verify the truncation costs them nothing.
//!
//! Reversal is only meaningful for driftless unit-diffusion ensembles —
//! the formulas above are statements about Brownian motion. A request
//! on anything else fails with [`PathError::NotBrownian`], detected by
//! checking that every stored state increment reproduces the stored
//! noise increment exactly.

use rayon::prelude::*;

use fbsde_core::Grid;

use crate::ensemble::PathEnsemble;
use crate::PathError;

/// A time-reversed Brownian ensemble: the reversed paths `Ŵ` and the
/// auxiliary Brownian increments `dB` of the module docs.
///
/// `Ŵ` is stored unshifted (`Ŵ[0] = W_T`, `Ŵ[M] = 0`); consumers that
/// need the path started at `x0` add it back, which keeps the
/// compensator `Ŵ/(T−s)` — defined with the unshifted path — directly
/// readable.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedEnsemble {
    /// Mesh shared with the forward ensemble. The reversed path at node
    /// `m` corresponds to forward time `T − τ_m`.
    pub grid: Grid,
    /// Starting point of the forward paths (not baked into `Ŵ`).
    pub x0: f64,
    /// Number of paths.
    pub n_paths: usize,
    /// Mean over paths of the absolute dropped final increment. The
    /// compensator weight is exactly 1 on the final sub-interval, so
    /// this telescopes to |Ŵ[M]| = 0; the field records the measured
    /// value as evidence the truncation is exact.
    pub dropped_increment_mean_abs: f64,
    /// Reversed paths, `n_paths × (M+1)`, row per path.
    w_hat: Vec<f64>,
    /// Auxiliary increments, `n_paths × (M−1)`, row per path; the final
    /// sub-interval is dropped.
    db: Vec<f64>,
}

impl ReversedEnsemble {
    /// Number of retained `dB` increments per path (`M − 1`).
    pub fn kept_steps(&self) -> usize {
        self.grid.n_time_steps - 1
    }

    /// Reversed path `p`: `Ŵ[m] = W[M−m]`, one value per time node.
    pub fn w_hat_path(&self, p: usize) -> &[f64] {
        let nodes = self.grid.n_time_nodes();
        &self.w_hat[p * nodes..(p + 1) * nodes]
    }

    /// Auxiliary increments of path `p`, one per retained sub-interval.
    pub fn db_path(&self, p: usize) -> &[f64] {
        let kept = self.kept_steps();
        &self.db[p * kept..(p + 1) * kept]
    }
}

/// Reverses a Brownian ensemble and tabulates the auxiliary increments.
///
/// Fails with [`PathError::NotBrownian`] unless every stored step
/// satisfies `X[m+1] = X[m] + dW[m]` exactly, which is the arithmetic
/// fingerprint of simulation with zero drift and unit diffusion.
pub fn time_reversed_paths(ensemble: &PathEnsemble) -> Result<ReversedEnsemble, PathError> {
    let grid = ensemble.grid;
    let nodes = grid.n_time_nodes();
    let steps = nodes - 1;
    for p in 0..ensemble.n_paths {
        let x = ensemble.path_x(p);
        let dw = ensemble.path_dw(p);
        for m in 0..steps {
            if x[m + 1] != x[m] + dw[m] {
                return Err(PathError::NotBrownian(format!(
                    "path {p} step {m}: state increment {:.6e} does not equal the \
                     noise increment {:.6e}; reversal is defined for zero-drift, \
                     unit-diffusion ensembles only",
                    x[m + 1] - x[m],
                    dw[m]
                )));
            }
        }
    }

    let x0 = ensemble.path_x(0)[0];
    let dt = grid.dt();
    let span = grid.t_final - grid.t0;
    let kept = steps - 1;
    let mut w_hat = vec![0.0f64; ensemble.n_paths * nodes];
    let dropped: Vec<f64> = w_hat
        .par_chunks_mut(nodes)
        .enumerate()
        .map(|(p, wh_row)| {
            let x = ensemble.path_x(p);
            for m in 0..nodes {
                wh_row[m] = x[nodes - 1 - m] - x0;
            }
            // The increment that would occupy the final sub-interval:
            // its compensator weight dt/(T−τ) is exactly 1 there, so it
            // telescopes to Ŵ[M] = 0 and dropping it is exact.
            ((wh_row[steps] - wh_row[steps - 1]) + wh_row[steps - 1]).abs()
        })
        .collect();
    let dropped_increment_mean_abs = fbsde_core::stats::mean(&dropped);

    let mut db = vec![0.0f64; ensemble.n_paths * kept];
    if kept > 0 {
        let w_hat_ref = &w_hat;
        db.par_chunks_mut(kept).enumerate().for_each(|(p, db_row)| {
            let wh_row = &w_hat_ref[p * nodes..(p + 1) * nodes];
            for (m, slot) in db_row.iter_mut().enumerate() {
                let tau = m as f64 * dt;
                *slot = (wh_row[m + 1] - wh_row[m]) + wh_row[m] / (span - tau) * dt;
            }
        });
    }

    Ok(ReversedEnsemble {
        grid,
        x0,
        n_paths: ensemble.n_paths,
        dropped_increment_mean_abs,
        w_hat,
        db,
    })
}
