//! Statistical oracles for the local-time estimators: closed-form
//! Brownian means, exact discrete telescopes, refinement orders, and
//! cross-route agreement of flow derivatives.

use fbsde_core::{stats, Grid};
use fbsde_localtime::{
    default_epsilon, exponential_moment_check, level_local_time_mean,
    sobolev_flow_decomposition, sobolev_flow_smooth, spacetime_local_time_integral,
    spacetime_local_time_scan,
};
use fbsde_paths::{girsanov_weight, simulate_forward, PathEnsemble};
use proptest::prelude::*;

const UNIT: fn(f64, f64) -> f64 = |_, _| 1.0;
const ZERO: fn(f64, f64) -> f64 = |_, _| 0.0;

fn brownian(x0: f64, steps: usize, n: usize, seed: u64) -> (Grid, PathEnsemble) {
    let grid = Grid::new(0.0, 1.0, steps, -12.0, 12.0, 8).unwrap();
    let e = simulate_forward(&ZERO, &UNIT, x0, &grid, n, seed);
    (grid, e)
}

/// Brownian motion spends `√(2T/π)` of expected local time at its own
/// starting level (the reflection principle maps `L_T^0` to `|W_T|`).
/// The occupation-band estimator at the default band width must land
/// within four standard errors.
#[test]
fn brownian_level_local_time_matches_reflection_mean() {
    let (grid, e) = brownian(0.4, 1024, 4000, 101);
    let eps = default_epsilon(grid.dt());
    let r = level_local_time_mean(&e, 0.4, eps, &UNIT);
    let exact = (2.0 / std::f64::consts::PI).sqrt();
    let se = r.standard_error.unwrap();
    assert!(
        (r.value - exact).abs() <= 4.0 * se,
        "occupation mean {:.5} vs √(2/π) {:.5}, gate {:.5}",
        r.value,
        exact,
        4.0 * se
    );
}

/// Halving the band half-width on a fine mesh moves the estimate by
/// less than two standard errors: the estimator has stabilized in ε.
#[test]
fn halving_the_band_moves_the_estimate_within_noise() {
    let (grid, e) = brownian(0.0, 1024, 4000, 55);
    let eps = default_epsilon(grid.dt());
    let full = level_local_time_mean(&e, 0.0, eps, &UNIT);
    let half = level_local_time_mean(&e, 0.0, eps / 2.0, &UNIT);
    let gate = 2.0
        * (full.standard_error.unwrap().powi(2) + half.standard_error.unwrap().powi(2)).sqrt();
    assert!(
        (full.value - half.value).abs() <= gate,
        "ε {:.4} → {:.5}, ε/2 → {:.5}, gate {:.5}",
        eps,
        full.value,
        half.value,
        gate
    );
}

/// For φ(s,z) = z the sheet integral is −T pathwise in the mesh limit;
/// the ensemble route at moderate scale must reproduce it within four
/// standard errors and the pathwise telescope must hold to rounding.
#[test]
fn linear_kernel_recovers_negative_horizon() {
    let (_, e) = brownian(0.25, 512, 10_000, 2024);
    let d = spacetime_local_time_integral(&|_, z| z, &e).unwrap();
    let mean = d.mean();
    let se = d.standard_error();
    assert!(
        (mean + 1.0).abs() <= 4.0 * se,
        "mean {mean:.6} vs −1, gate {:.2e}",
        4.0 * se
    );
    // Discrete telescope: value + Σ dW² vanishes pathwise.
    for p in 0..200 {
        let qv: f64 = e.path_dw(p).iter().map(|w| w * w).sum();
        assert!((d.values[p] + qv).abs() < 1e-9);
    }
}

/// The streaming route at the acceptance-scale mesh (dt = 1/1024):
/// same −T oracle without materializing the ensemble.
#[test]
fn linear_kernel_streaming_route_recovers_negative_horizon() {
    let grid = Grid::new(0.0, 1.0, 1024, -12.0, 12.0, 8).unwrap();
    let d = spacetime_local_time_scan(&|_, z| z, 0.0, &grid, 40_000, 31, 4096);
    let mean = d.mean();
    let se = d.standard_error();
    assert!(
        (mean + 1.0).abs() <= 4.0 * se,
        "streaming mean {mean:.6} vs −1, gate {:.2e}",
        4.0 * se
    );
}

/// The pathwise residual against −∫∂_xφ ds decays at order ≥ 0.4 under
/// dt-halving. For φ(s,z) = z the residual is `T − Σ dW²`, whose RMS is
/// `√(2T·dt)` — exact order one half.
#[test]
fn self_consistency_residual_decays_at_order_half() {
    let rms_at = |steps: usize, seed: u64| -> f64 {
        let (grid, e) = brownian(0.1, steps, 4000, seed);
        let d = spacetime_local_time_integral(&|_, z| z, &e).unwrap();
        let span = grid.t_final - grid.t0;
        let sq: Vec<f64> = d.values.iter().map(|v| (v + span) * (v + span)).collect();
        stats::mean(&sq).sqrt()
    };
    let coarse = rms_at(256, 7);
    let fine = rms_at(512, 8);
    let order = (coarse / fine).log2();
    assert!(
        order >= 0.4,
        "residual RMS {coarse:.4e} → {fine:.4e}, order {order:.3} < 0.4"
    );
    assert!(order <= 0.8, "order {order:.3} implausibly high");
}

/// Differentiable kernel: φ(s,z) = z² pairs with −∫ 2·W^x_s ds. The
/// pathwise discrepancy is pure time-discretization noise, bounded in
/// RMS by 5·√dt.
#[test]
fn quadratic_kernel_matches_minus_running_integral() {
    let (grid, e) = brownian(0.3, 1024, 2000, 909);
    let d = spacetime_local_time_integral(&|_, z| z * z, &e).unwrap();
    let dt = grid.dt();
    let mut sq_sum = 0.0;
    for p in 0..e.n_paths {
        let x = e.path_x(p);
        let running: f64 = x.iter().take(grid.n_time_steps).map(|&xm| 2.0 * xm * dt).sum();
        let residual = d.values[p] + running;
        sq_sum += residual * residual;
    }
    let rms = (sq_sum / e.n_paths as f64).sqrt();
    let gate = 5.0 * dt.sqrt();
    assert!(rms <= gate, "quadratic-kernel RMS {rms:.4e} vs gate {gate:.4e}");
}

/// Exponential moments of sheet integrals of a drift with bounded slope
/// obey the deterministic bound exp(|λ|·sup|∂_x b|·T) up to Monte Carlo
/// noise, and every individual exponent respects it up to O(√dt).
#[test]
fn bounded_slope_drift_respects_exponential_moment_bound() {
    let b = |_: f64, x: f64| 0.6 * x.tanh(); // sup|∂_x b| = 0.6
    let (_, e) = brownian(0.0, 512, 3000, 404);
    let r = exponential_moment_check(&b, -1.5, &e).unwrap();
    let bound = (1.5f64 * 0.6 * 1.0).exp();
    let rel_se = r.standard_error / r.estimate;
    assert!(
        r.estimate <= bound * (1.0 + 5.0 * rel_se),
        "estimate {:.4} vs bound {:.4}",
        r.estimate,
        bound
    );
    assert!(r.estimate.is_finite());
    // Pathwise: the exponent −1.5·∫∫bL = 1.5·∫∂_xb ds ≤ 0.9 plus
    // discretization noise of order √dt.
    assert!(
        r.max_exponent <= 0.9 + 0.25,
        "max exponent {:.4}",
        r.max_exponent
    );
}

/// Doubling the ensemble moves the exponential-moment estimate within
/// combined Monte Carlo noise: no heavy tail is silently truncated.
#[test]
fn exponential_moment_is_stable_under_path_doubling() {
    let b = |_: f64, x: f64| 0.8 * (x >= 0.3) as u8 as f64; // bounded, discontinuous
    let (_, e1) = brownian(0.0, 512, 3000, 51);
    let (_, e2) = brownian(0.0, 512, 6000, 52);
    let r1 = exponential_moment_check(&b, 1.0, &e1).unwrap();
    let r2 = exponential_moment_check(&b, 1.0, &e2).unwrap();
    let gate = 4.0 * (r1.standard_error.powi(2) + r2.standard_error.powi(2)).sqrt();
    assert!(
        (r1.estimate - r2.estimate).abs() <= gate,
        "estimates {:.4} vs {:.4}, gate {:.4}",
        r1.estimate,
        r2.estimate,
        gate
    );
}

/// On Brownian paths with a smooth drift the two flow-derivative
/// exponents — integrated slope and sheet integral — agree pathwise to
/// O(√dt).
#[test]
fn smooth_and_decomposition_flow_routes_agree_pathwise() {
    let b = |_: f64, x: f64| -0.8 * x.tanh();
    let slope = |_: f64, x: f64| {
        let c = x.cosh();
        -0.8 / (c * c)
    };
    let (grid, e) = brownian(0.3, 1024, 2000, 606);
    let smooth = sobolev_flow_smooth(&e, &slope);
    let deco = sobolev_flow_decomposition(&b, &e).unwrap();
    let dt = grid.dt();
    for node in [grid.n_time_steps / 2, grid.n_time_steps] {
        let mut sq = 0.0;
        for p in 0..e.n_paths {
            let diff = smooth.xi_path(p)[node] - deco.xi_path(p)[node];
            sq += diff * diff;
        }
        let rms = (sq / e.n_paths as f64).sqrt();
        let gate = 5.0 * dt.sqrt();
        assert!(
            rms <= gate,
            "node {node}: route disagreement RMS {rms:.4e} vs {gate:.4e}"
        );
    }
    assert!(smooth.min_value() > 0.0);
    assert!(deco.min_value() > 0.0);
}

/// Flow derivative of a discontinuous (two-level) drift: the
/// decomposition route on Brownian paths, re-weighted to the drifted
/// law by Girsanov factors, must agree with the common-noise finite
/// difference of the drifted flow within combined Monte Carlo error.
/// No smooth route exists for this drift — the slope is a point mass.
#[test]
fn step_drift_flow_matches_common_noise_finite_difference() {
    let c = 0.5;
    let level = 0.2;
    let b = move |_: f64, x: f64| if x >= level { c } else { 0.0 };
    let steps = 512;
    let n = 20_000;

    let (grid, e) = brownian(0.0, steps, n, 1717);
    let deco = sobolev_flow_decomposition(&b, &e).unwrap();
    let xi = deco.terminal();
    let g = girsanov_weight(&e, &b);
    drop(deco);
    drop(e);
    let weighted: Vec<f64> = xi.iter().zip(&g).map(|(x, w)| x * w).collect();
    let m_deco = stats::mean(&weighted);
    let se_deco = stats::standard_error(&weighted);

    let h = 1e-3;
    let plus = simulate_forward(&b, &UNIT, h, &grid, n, 2718);
    let minus = simulate_forward(&b, &UNIT, -h, &grid, n, 2718);
    let diffs: Vec<f64> = plus
        .terminal_states()
        .iter()
        .zip(minus.terminal_states())
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    let m_fd = stats::mean(&diffs);
    let se_fd = stats::standard_error(&diffs);

    let gate = 4.0 * (se_deco * se_deco + se_fd * se_fd).sqrt();
    assert!(
        (m_deco - m_fd).abs() <= gate,
        "decomposition {m_deco:.4} ± {se_deco:.4} vs finite difference {m_fd:.4} ± {se_fd:.4}"
    );
    // An upward step drift inflates the flow: both estimates sit above 1.
    assert!(m_deco > 1.0 && m_fd > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Constant kernels integrate to zero against the sheet for any
    /// starting point, level shift, and mesh — the telescope is exact.
    #[test]
    fn constant_kernels_always_telescope_to_zero(
        c in -3.0f64..3.0,
        x0 in -1.0f64..1.0,
        steps_pow in 3u32..7,
        seed in 0u64..500,
    ) {
        let steps = 1usize << steps_pow;
        let (_, e) = brownian(x0, steps, 16, seed);
        let d = spacetime_local_time_integral(&move |_, _| c, &e).unwrap();
        for &v in &d.values {
            prop_assert!(v.abs() < 1e-8, "constant kernel gave {v:.3e}");
        }
    }

    /// Occupation estimates are nonnegative for arbitrary levels and
    /// band widths.
    #[test]
    fn occupation_estimates_are_nonnegative(
        level in -2.0f64..2.0,
        eps_exp in 0.2f64..0.6,
        seed in 0u64..500,
    ) {
        let (grid, e) = brownian(0.0, 64, 32, seed);
        let eps = grid.dt().powf(eps_exp);
        let r = level_local_time_mean(&e, level, eps, &UNIT);
        prop_assert!(r.value >= 0.0);
    }
}
