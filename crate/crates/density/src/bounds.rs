//! Covariance bounds for the solution triple, assembled from measured
//! constants.
//!
//! The sandwich exponents come from squeezing the Malliavin derivative of
//! the audited functional. With `K` a slope bound for the coupled drift
//! and `λ ≤ σ ≤ Λ` over the region the paths occupy,
//!
//! ```text
//! (λ/Λ)·e^{−Kt} ≤ D_s X_t ≤ Λ·e^{Kt}
//! ```
//!
//! and integrating `D_s X_t·E[D_s X_t | 𝔉_s]` over `s ≤ t` gives
//!
//! ```text
//! l_X = c_lower·t·e^{−2Kt},    L_X = c_upper·t·e^{2Kt},
//! ```
//!
//! with `c_upper = Λ²` and `c_lower = (λ/Λ)²` read off the same chain
//! (both factors are config-overridable). The value process multiplies
//! the derivative by `∂_x v(t, X_t)`, so its bounds pick up the square of
//! the field gradient: `α(t) ≤ |∂_x v| ≤ Υ` over the occupied region
//! yields
//!
//! ```text
//! l_Y = c_lower·t·(α(t)·e^{−Kt})²,    L_Y = c_upper·t·(Υ·e^{Kt})²,
//! ```
//!
//! and the control process does the same with the field curvature
//! (`ω(t) ≤ |∂²_x v| ≤ Υ⁽¹⁾`). The gradient (curvature) must keep one
//! sign over the occupied slice at the evaluation time — otherwise the
//! squeeze has no positive lower constant and density existence is not
//! certified; those cases return [`DensityError::Degenerate`].
//!
//! Every constant is *measured*: the occupied region is the per-time
//! min/max of the simulated paths, and the field derivatives are scanned
//! over exactly that region, never taken on faith from model metadata.

use fbsde_field::DecouplingField;
use fbsde_models::ModelInstance;
use fbsde_triple::TripleEnsemble;

use crate::envelopes::{gaussian_sandwich_check, EnvelopeConstants};
use crate::{BoundReport, DensityError};

/// Tuning knobs for the bound constructors.
#[derive(Debug, Clone)]
pub struct BoundsConfig {
    /// Replaces the default `c_upper = Λ²` factor in `L`.
    pub c_upper_override: Option<f64>,
    /// Replaces the default `c_lower = (λ/Λ)²` factor in `l`.
    pub c_lower_override: Option<f64>,
    /// Points per time row when scanning coefficients over the occupied
    /// interval.
    pub n_scan_points: usize,
    /// Smallest admissible `α(t)` / `ω(t)`; below it the squeeze is
    /// reported as degenerate.
    pub degeneracy_threshold: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            c_upper_override: None,
            c_lower_override: None,
            n_scan_points: 129,
            degeneracy_threshold: 1e-8,
        }
    }
}

/// Per-time extent of the simulated ensemble: the interval actually
/// visited by the paths at each time node.
#[derive(Debug, Clone)]
pub struct OccupiedRegion {
    /// `(min, max)` of the path states at each time node.
    pub per_row: Vec<(f64, f64)>,
}

impl OccupiedRegion {
    /// Extracts the occupied region from a reconstructed triple.
    pub fn from_triples(triples: &TripleEnsemble) -> Self {
        let nodes = triples.grid.n_time_nodes();
        let mut per_row = vec![(f64::INFINITY, f64::NEG_INFINITY); nodes];
        for p in 0..triples.n_paths {
            for (m, &x) in triples.path_x(p).iter().enumerate() {
                let (lo, hi) = per_row[m];
                per_row[m] = (lo.min(x), hi.max(x));
            }
        }
        Self { per_row }
    }

    /// Wraps externally collected per-row extents (for streamed
    /// ensembles too large to materialise).
    pub fn from_rows(per_row: Vec<(f64, f64)>) -> Self {
        Self { per_row }
    }
}

/// Scans `f(t_m, x)` over the occupied interval of each row in
/// `rows`, returning the (min, max) over all scanned points.
fn scan_rows<F: Fn(f64, f64) -> f64>(
    f: &F,
    occ: &OccupiedRegion,
    t_node: impl Fn(usize) -> f64,
    rows: std::ops::RangeInclusive<usize>,
    n_scan: usize,
) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in rows {
        let (a, b) = occ.per_row[m];
        let t = t_node(m);
        for j in 0..n_scan {
            let x = if n_scan == 1 || b == a {
                a
            } else {
                a + (b - a) * j as f64 / (n_scan - 1) as f64
            };
            let v = f(t, x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Time-node index closest to `t` on the ensemble grid.
fn node_of(triples: &TripleEnsemble, t: f64) -> usize {
    let (cell, frac) = triples.grid.locate_t(t);
    if frac > 0.5 {
        cell + 1
    } else {
        cell
    }
}

/// States of every path at node `m`.
fn x_at(triples: &TripleEnsemble, m: usize) -> Vec<f64> {
    (0..triples.n_paths)
        .map(|p| triples.path_x(p)[m])
        .collect()
}

/// Control values of every path at node `m`.
fn z_at(triples: &TripleEnsemble, m: usize) -> Vec<f64> {
    (0..triples.n_paths)
        .map(|p| triples.path_z(p)[m])
        .collect()
}

/// Diffusion extremes and elapsed time shared by all three bound
/// constructors; errors out on non-positive diffusion or `t ≤ t₀`.
fn common_pieces(
    triples: &TripleEnsemble,
    model: &ModelInstance,
    t: f64,
    cfg: &BoundsConfig,
) -> Result<(usize, f64, f64, f64, f64, f64), DensityError> {
    let node = node_of(triples, t);
    let elapsed = triples.grid.t_node(node) - triples.grid.t0;
    if !(elapsed > 0.0) {
        return Err(DensityError::Degenerate(format!(
            "bounds need an evaluation time after the start, got node {node}"
        )));
    }
    let occ = OccupiedRegion::from_triples(triples);
    let sigma = &model.coefficients.diffusion_sigma;
    let grid = triples.grid;
    let (sig_min, sig_max) = scan_rows(
        &|tt, x| sigma(tt, x),
        &occ,
        |m| grid.t_node(m),
        0..=node,
        cfg.n_scan_points,
    );
    if !(sig_min > 0.0) {
        return Err(DensityError::Degenerate(format!(
            "diffusion reaches {sig_min} over the occupied region; ellipticity lost"
        )));
    }
    let c_upper = cfg.c_upper_override.unwrap_or(sig_max * sig_max);
    let c_lower = cfg
        .c_lower_override
        .unwrap_or((sig_min / sig_max) * (sig_min / sig_max));
    Ok((node, elapsed, sig_min, sig_max, c_upper, c_lower))
}

/// Covariance bounds and sandwich/tail audit for the forward state at
/// time `t`, with drift slope bound `k_bound`.
///
/// The model must declare its drift derivative (the slope bound has to be
/// certifiable, not folklore); `λ` and `Λ` are measured by scanning the
/// diffusion over the occupied region up to `t`.
pub fn density_bounds_x(
    triples: &TripleEnsemble,
    model: &ModelInstance,
    k_bound: f64,
    t: f64,
) -> Result<BoundReport, DensityError> {
    density_bounds_x_with_config(triples, model, k_bound, t, &BoundsConfig::default())
}

/// [`density_bounds_x`] with explicit configuration.
pub fn density_bounds_x_with_config(
    triples: &TripleEnsemble,
    model: &ModelInstance,
    k_bound: f64,
    t: f64,
    cfg: &BoundsConfig,
) -> Result<BoundReport, DensityError> {
    if model.coefficients.derivatives.b_x.is_none() {
        return Err(DensityError::MissingDerivatives(
            "forward-state bounds need the drift's spatial derivative to certify the \
             slope bound; the model declares none"
                .into(),
        ));
    }
    let (node, elapsed, sig_min, sig_max, c_upper, c_lower) =
        common_pieces(triples, model, t, cfg)?;
    let l = c_lower * elapsed * (-2.0 * k_bound * elapsed).exp();
    let l_up = c_upper * elapsed * (2.0 * k_bound * elapsed).exp();
    let samples = x_at(triples, node);
    let mean = fbsde_core::stats::mean(&samples);
    let mut report = gaussian_sandwich_check(&samples, l, l_up, mean)?;
    report.constants = EnvelopeConstants {
        t: Some(elapsed),
        k_bound: Some(k_bound),
        sigma_min: Some(sig_min),
        sigma_max: Some(sig_max),
        c_upper: Some(c_upper),
        c_lower: Some(c_lower),
        ..EnvelopeConstants::default()
    };
    Ok(report)
}

/// Checks one-signedness over the occupied slice and returns the
/// separation constant, or a degeneracy error naming the quantity.
fn one_signed_min_abs(
    lo: f64,
    hi: f64,
    threshold: f64,
    what: &str,
) -> Result<f64, DensityError> {
    if lo < -threshold && hi > threshold {
        return Err(DensityError::Degenerate(format!(
            "{what} changes sign over the occupied slice (range [{lo}, {hi}]); \
             the squeeze has no positive lower constant"
        )));
    }
    let min_abs = lo.abs().min(hi.abs());
    // A sign change through zero also collapses the minimum modulus.
    let min_abs = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { min_abs };
    if min_abs <= threshold {
        return Err(DensityError::Degenerate(format!(
            "{what} reaches {min_abs} over the occupied slice; density existence \
             is not certified"
        )));
    }
    Ok(min_abs)
}

/// Covariance bounds and audits for the value process `Y_t = v(t, X_t)`.
///
/// The squeeze multiplies the forward chain by the field gradient:
/// `Υ` is the largest `|∂_x v|` over the whole occupied region up to `t`,
/// `α(t)` the smallest over the occupied slice at `t`. The gradient must
/// keep one sign on that slice.
pub fn density_bounds_y(
    triples: &TripleEnsemble,
    field: &DecouplingField,
    k_bound: f64,
    t: f64,
) -> Result<BoundReport, DensityError> {
    density_bounds_y_with_config(triples, field, k_bound, t, &BoundsConfig::default())
}

/// [`density_bounds_y`] with explicit configuration.
pub fn density_bounds_y_with_config(
    triples: &TripleEnsemble,
    field: &DecouplingField,
    k_bound: f64,
    t: f64,
    cfg: &BoundsConfig,
) -> Result<BoundReport, DensityError> {
    let node = node_of(triples, t);
    let elapsed = triples.grid.t_node(node) - triples.grid.t0;
    if !(elapsed > 0.0) {
        return Err(DensityError::Degenerate(
            "bounds need an evaluation time after the start".into(),
        ));
    }
    if !field.grid.same_time_axis(&triples.grid) {
        return Err(DensityError::Degenerate(
            "field and ensemble disagree on the time axis".into(),
        ));
    }
    let occ = OccupiedRegion::from_triples(triples);
    let (_, grad_sup) = scan_rows(
        &|tt, x| field.gradient(tt, x).abs(),
        &occ,
        |m| triples.grid.t_node(m),
        0..=node,
        cfg.n_scan_points,
    );
    let (slice_lo, slice_hi) = scan_rows(
        &|tt, x| field.gradient(tt, x),
        &occ,
        |m| triples.grid.t_node(m),
        node..=node,
        cfg.n_scan_points,
    );
    let alpha = one_signed_min_abs(
        slice_lo,
        slice_hi,
        cfg.degeneracy_threshold,
        "field gradient",
    )?;

    // The value- and control-process squeezes are stated in the
    // unit-diffusion normalisation; for non-unit diffusion supply the
    // measured (λ/Λ)² and Λ² factors through the config overrides.
    let c_upper = cfg.c_upper_override.unwrap_or(1.0);
    let c_lower = cfg.c_lower_override.unwrap_or(1.0);

    let decay = (-k_bound * elapsed).exp();
    let growth = (k_bound * elapsed).exp();
    let l = c_lower * elapsed * (alpha * decay) * (alpha * decay);
    let l_up = c_upper * elapsed * (grad_sup * growth) * (grad_sup * growth);

    let samples = triples.y_at(node);
    let mean = fbsde_core::stats::mean(&samples);
    let mut report = gaussian_sandwich_check(&samples, l, l_up, mean)?;
    report.constants = EnvelopeConstants {
        t: Some(elapsed),
        k_bound: Some(k_bound),
        c_upper: Some(c_upper),
        c_lower: Some(c_lower),
        gradient_sup: Some(grad_sup),
        gradient_min_abs: Some(alpha),
        ..EnvelopeConstants::default()
    };
    Ok(report)
}

/// Covariance bounds and audits for the control process
/// `Z_t = σ·∂_x v(t, X_t)`, squeezing with the field curvature instead of
/// the gradient (`ω(t) ≤ |∂²_x v| ≤ Υ⁽¹⁾`).
pub fn density_bounds_z(
    triples: &TripleEnsemble,
    field: &DecouplingField,
    k_bound: f64,
    t: f64,
) -> Result<BoundReport, DensityError> {
    density_bounds_z_with_config(triples, field, k_bound, t, &BoundsConfig::default())
}

/// [`density_bounds_z`] with explicit configuration.
pub fn density_bounds_z_with_config(
    triples: &TripleEnsemble,
    field: &DecouplingField,
    k_bound: f64,
    t: f64,
    cfg: &BoundsConfig,
) -> Result<BoundReport, DensityError> {
    let node = node_of(triples, t);
    let elapsed = triples.grid.t_node(node) - triples.grid.t0;
    if !(elapsed > 0.0) {
        return Err(DensityError::Degenerate(
            "bounds need an evaluation time after the start".into(),
        ));
    }
    if !field.grid.same_time_axis(&triples.grid) {
        return Err(DensityError::Degenerate(
            "field and ensemble disagree on the time axis".into(),
        ));
    }
    let occ = OccupiedRegion::from_triples(triples);
    let (_, hess_sup) = scan_rows(
        &|tt, x| field.hessian(tt, x).abs(),
        &occ,
        |m| triples.grid.t_node(m),
        0..=node,
        cfg.n_scan_points,
    );
    let (slice_lo, slice_hi) = scan_rows(
        &|tt, x| field.hessian(tt, x),
        &occ,
        |m| triples.grid.t_node(m),
        node..=node,
        cfg.n_scan_points,
    );
    let omega = one_signed_min_abs(
        slice_lo,
        slice_hi,
        cfg.degeneracy_threshold,
        "field curvature",
    )?;

    let c_upper = cfg.c_upper_override.unwrap_or(1.0);
    let c_lower = cfg.c_lower_override.unwrap_or(1.0);
    let decay = (-k_bound * elapsed).exp();
    let growth = (k_bound * elapsed).exp();
    let l = c_lower * elapsed * (omega * decay) * (omega * decay);
    let l_up = c_upper * elapsed * (hess_sup * growth) * (hess_sup * growth);

    let samples = z_at(triples, node);
    let mean = fbsde_core::stats::mean(&samples);
    let mut report = gaussian_sandwich_check(&samples, l, l_up, mean)?;
    report.constants = EnvelopeConstants {
        t: Some(elapsed),
        k_bound: Some(k_bound),
        c_upper: Some(c_upper),
        c_lower: Some(c_lower),
        hessian_sup: Some(hess_sup),
        hessian_min_abs: Some(omega),
        ..EnvelopeConstants::default()
    };
    Ok(report)
}
