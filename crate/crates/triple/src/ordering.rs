//! Ordering experiments on pairs of systems: comonotonicity of the
//! martingale integrands under shared noise, and pointwise comparison
//! of the decoupling fields.
//!
//! The comonotonicity statement says that two backward solutions driven
//! by the same Brownian motion have integrands of the same sign when
//! both terminal conditions are increasing (opposite signs when one is
//! decreasing), because each integrand is the diffusion times the field
//! gradient and monotone data propagate monotonically backward. The
//! experiment audits `Z¹·Z²` across an ensemble with shared increments:
//! both forward states are driven by the *same* `dW`, each through its
//! own field-frozen drift, and the product statistics are reported
//! against a tolerance that absorbs interpolation noise where either
//! gradient crosses zero.
//!
//! The comparison experiment is deterministic: with ordered terminal
//! data (and a driver ordering at the second solution), the fields
//! themselves order pointwise, so it suffices to count grid nodes.

use serde::{Deserialize, Serialize};

use fbsde_core::Grid;
use fbsde_field::{solve_decoupling_field, DecouplingField, SolverConfig};
use fbsde_models::ModelInstance;
use fbsde_paths::{euler_drive, scan_noise};

use crate::reconstruct::field_coupled_drift;
use crate::TripleError;

/// Shared-noise audit of `Z¹·Z²` over paths and times.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ComonotonicityReport {
    /// Paths simulated (per system, on shared noise).
    pub n_paths: usize,
    /// Product samples inspected (`n_paths × (M+1)`).
    pub n_samples: usize,
    /// Smallest product over all paths and times.
    pub min_product: f64,
    /// Largest product over all paths and times.
    pub max_product: f64,
    /// Tolerance used for the sign counts.
    pub tolerance: f64,
    /// Fraction of samples with product below `−tolerance`.
    pub fraction_negative: f64,
    /// Fraction of samples with product above `+tolerance`.
    pub fraction_positive: f64,
}

/// Tolerance absorbing interpolation noise near `Z ≈ 0`.
pub const COMONOTONE_TOLERANCE: f64 = 1e-8;

/// Solves both systems on `grid`, drives both forward states with the
/// same Brownian increments, and audits the product of the two
/// reconstructed integrands at every path and time node. Paths stream
/// in batches; nothing is retained.
pub fn comonotonicity_check(
    model1: &ModelInstance,
    model2: &ModelInstance,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ComonotonicityReport, TripleError> {
    let field1 = solve_decoupling_field(model1, grid, cfg)?;
    let field2 = solve_decoupling_field(model2, grid, cfg)?;
    Ok(comonotonicity_check_with_fields(
        model1, &field1, model2, &field2, grid, n_paths, seed,
    ))
}

/// Same audit with pre-solved fields (reused by callers that already
/// hold them).
pub fn comonotonicity_check_with_fields(
    model1: &ModelInstance,
    field1: &DecouplingField,
    model2: &ModelInstance,
    field2: &DecouplingField,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> ComonotonicityReport {
    let nodes = grid.n_time_nodes();
    let b1 = field_coupled_drift(model1, field1);
    let b2 = field_coupled_drift(model2, field2);
    let sig1 = |t: f64, x: f64| (model1.coefficients.diffusion_sigma)(t, x);
    let sig2 = |t: f64, x: f64| (model2.coefficients.diffusion_sigma)(t, x);

    // Per-path extrema and counts, reduced sequentially in path order.
    struct PathAudit {
        min_product: f64,
        max_product: f64,
        below: usize,
        above: usize,
    }
    let batch = 8192.min(n_paths.max(1));
    let audits = scan_noise(grid, n_paths, seed, batch, |_, dw| {
        let mut z1 = vec![0.0f64; nodes];
        euler_drive(&b1, &sig1, model1.x0, grid, dw, |m, xv| {
            z1[m] = sig1(grid.t_node(m), xv) * field1.gradient_at_row(m, xv);
        });
        let mut audit = PathAudit {
            min_product: f64::INFINITY,
            max_product: f64::NEG_INFINITY,
            below: 0,
            above: 0,
        };
        euler_drive(&b2, &sig2, model2.x0, grid, dw, |m, xv| {
            let z2 = sig2(grid.t_node(m), xv) * field2.gradient_at_row(m, xv);
            let product = z1[m] * z2;
            audit.min_product = audit.min_product.min(product);
            audit.max_product = audit.max_product.max(product);
            if product < -COMONOTONE_TOLERANCE {
                audit.below += 1;
            } else if product > COMONOTONE_TOLERANCE {
                audit.above += 1;
            }
        });
        audit
    });

    let mut min_product = f64::INFINITY;
    let mut max_product = f64::NEG_INFINITY;
    let mut below = 0usize;
    let mut above = 0usize;
    for a in &audits {
        min_product = min_product.min(a.min_product);
        max_product = max_product.max(a.max_product);
        below += a.below;
        above += a.above;
    }
    let n_samples = n_paths * nodes;
    ComonotonicityReport {
        n_paths,
        n_samples,
        min_product,
        max_product,
        tolerance: COMONOTONE_TOLERANCE,
        fraction_negative: below as f64 / n_samples as f64,
        fraction_positive: above as f64 / n_samples as f64,
    }
}

/// Pointwise field comparison over all grid nodes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    /// Grid nodes inspected.
    pub n_nodes: usize,
    /// Fraction of nodes with `v₁ ≤ v₂ + tolerance`.
    pub fraction_ordered: f64,
    /// Largest `v₁ − v₂` over the grid (negative when strictly ordered).
    pub max_excess: f64,
    /// Tolerance applied.
    pub tolerance: f64,
}

/// Compares two already-solved fields node by node.
pub fn compare_fields(
    field1: &DecouplingField,
    field2: &DecouplingField,
    tolerance: f64,
) -> Result<ComparisonReport, TripleError> {
    let g1 = field1.grid;
    let g2 = field2.grid;
    if g1 != g2 {
        return Err(TripleError::GridMismatch(
            "comparison requires identical grids".into(),
        ));
    }
    let nm = g1.n_time_nodes();
    let nj = g1.n_space_nodes();
    let mut ordered = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    for m in 0..nm {
        for j in 0..nj {
            let excess = field1.v.at(m, j) - field2.v.at(m, j);
            max_excess = max_excess.max(excess);
            if excess <= tolerance {
                ordered += 1;
            }
        }
    }
    let n_nodes = nm * nj;
    Ok(ComparisonReport {
        n_nodes,
        fraction_ordered: ordered as f64 / n_nodes as f64,
        max_excess,
        tolerance,
    })
}

/// Solves both systems on `grid` and compares the fields pointwise.
/// The ordering hypotheses (`φ₁ ≤ φ₂`, driver ordering at the second
/// solution) are the caller's responsibility; the report simply counts.
pub fn comparison_check(
    model1: &ModelInstance,
    model2: &ModelInstance,
    grid: &Grid,
    cfg: &SolverConfig,
    tolerance: f64,
) -> Result<ComparisonReport, TripleError> {
    let field1 = solve_decoupling_field(model1, grid, cfg)?;
    let field2 = solve_decoupling_field(model2, grid, cfg)?;
    compare_fields(&field1, &field2, tolerance)
}
