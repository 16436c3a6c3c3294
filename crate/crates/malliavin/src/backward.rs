//! First-order Malliavin derivatives of the backward pair.
//!
//! With `Y_t = v(t, X_t)` and `Z_t = σ(t, X_t) v_x(t, X_t)`, the chain rule
//! gives
//!
//! ```text
//! D_s Y_t = v_x(t, X_t) · D_s X_t ,
//! D_s Z_t = (σ v_xx + σ_x v_x)(t, X_t) · D_s X_t ,
//! ```
//!
//! so both derivatives share the forward factor `D_s X_t` and differ only in
//! a multiplier that depends on `t` alone. The multipliers are tabulated once
//! per path and node; any `(s, t)` entry is then a single product. On the
//! diagonal this reproduces the identity `D_t Y_t = Z_t` exactly, because
//! `D_t X_t = σ(t, X_t)` and multiplication commutes.

use std::io::Write;

use fbsde_field::DecouplingField;
use fbsde_models::ModelInstance;
use fbsde_triple::TripleEnsemble;
use rayon::prelude::*;

use crate::{MalliavinError, MalliavinSample};

/// Node-wise multipliers turning `D_s X_t` into `D_s Y_t` and `D_s Z_t`.
#[derive(Debug, Clone)]
pub struct MalliavinBackward {
    /// Number of paths (matches the generating sample).
    pub n_paths: usize,
    /// `v_x(t_m, X_m)` per path and node.
    a_y: Vec<f64>,
    /// `(σ v_xx + σ_x v_x)(t_m, X_m)` per path and node.
    a_z: Vec<f64>,
    n_nodes: usize,
}

impl MalliavinBackward {
    /// `D_s Y_t` for node indices `s ≤ t` on one path.
    pub fn dy(&self, sample: &MalliavinSample, path: usize, s: usize, t: usize) -> f64 {
        self.a_y[path * self.n_nodes + t] * sample.dx(path, s, t)
    }

    /// `D_s Z_t` for node indices `s ≤ t` on one path.
    pub fn dz(&self, sample: &MalliavinSample, path: usize, s: usize, t: usize) -> f64 {
        self.a_z[path * self.n_nodes + t] * sample.dx(path, s, t)
    }

    /// Diagonal `D_t Y_t = v_x(t, X_t) · σ(t, X_t)`.
    pub fn diagonal_dy(&self, sample: &MalliavinSample, path: usize, t: usize) -> f64 {
        self.a_y[path * self.n_nodes + t] * sample.diagonal(path, t)
    }

    /// The `Y`-multiplier `v_x(t_m, X_m)` along one path.
    pub fn gradient_factor(&self, path: usize) -> &[f64] {
        &self.a_y[path * self.n_nodes..(path + 1) * self.n_nodes]
    }
}

/// Tabulates the backward multipliers along the triple's paths.
///
/// The model supplies `σ` and `σ_x` for the `Z`-multiplier; the field
/// supplies `v_x` and `v_xx`. Fails with [`MalliavinError::MissingDerivatives`]
/// when `σ_x` is not declared, and with [`MalliavinError::GridMismatch`] when
/// the triple and the sample disagree on shape.
pub fn malliavin_backward(
    triple: &TripleEnsemble,
    field: &DecouplingField,
    sample: &MalliavinSample,
    model: &ModelInstance,
) -> Result<MalliavinBackward, MalliavinError> {
    if !triple.grid.same_time_axis(&sample.grid) || triple.n_paths != sample.n_paths {
        return Err(MalliavinError::GridMismatch(format!(
            "triple has {} paths on {} nodes, sample has {} paths on {} nodes",
            triple.n_paths,
            triple.grid.n_time_nodes(),
            sample.n_paths,
            sample.n_nodes()
        )));
    }
    let sigma = &model.coefficients.diffusion_sigma;
    let sigma_x = model
        .coefficients
        .derivatives
        .sigma_x
        .as_ref()
        .ok_or_else(|| {
            MalliavinError::MissingDerivatives(
                "sigma_x is required by the Z-multiplier (sigma v_xx + sigma_x v_x)".into(),
            )
        })?;
    let nodes = sample.n_nodes();
    let n = sample.n_paths;
    let mut a_y = vec![0.0; n * nodes];
    let mut a_z = vec![0.0; n * nodes];
    a_y.par_chunks_mut(nodes)
        .zip(a_z.par_chunks_mut(nodes))
        .enumerate()
        .for_each(|(p, (ry, rz))| {
            let x = triple.path_x(p);
            for m in 0..nodes {
                let t = triple.grid.t_node(m);
                let vx = field.gradient_at_row(m, x[m]);
                let vxx = field.hessian_at_row(m, x[m]);
                ry[m] = vx;
                rz[m] = sigma(t, x[m]) * vxx + sigma_x(t, x[m]) * vx;
            }
        });
    Ok(MalliavinBackward {
        n_paths: n,
        a_y,
        a_z,
        n_nodes: nodes,
    })
}

/// Dumps the diagonal derivatives `D_t X_t`, `D_t Y_t`, `D_t Z_t` as CSV with
/// header `path,t,dx_diag,dy_diag,dz_diag`, keeping every `path_stride`-th
/// path.
pub fn write_diagonal_csv<W: Write>(
    sample: &MalliavinSample,
    backward: &MalliavinBackward,
    path_stride: usize,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "path,t,dx_diag,dy_diag,dz_diag")?;
    let stride = path_stride.max(1);
    let nodes = sample.n_nodes();
    for p in (0..sample.n_paths).step_by(stride) {
        for m in 0..nodes {
            let t = sample.grid.t_node(m);
            let dx = sample.diagonal(p, m);
            let dy = backward.diagonal_dy(sample, p, m);
            let dz = backward.dz(sample, p, m, m);
            writeln!(out, "{p},{t},{dx},{dy},{dz}")?;
        }
    }
    Ok(())
}
