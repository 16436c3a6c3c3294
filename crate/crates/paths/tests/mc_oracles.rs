//! Distributional oracles for the forward engine.
//!
//! Every quantitative check compares Monte Carlo output against a
//! closed-form law (Brownian or Ornstein–Uhlenbeck moments, stochastic
//! exponential moments) or against a self-convergence reference at a
//! sixteen-times finer step, with statistical gates expressed in
//! standard errors of the estimator under test.

use fbsde_core::stats;
use fbsde_core::Grid;
use fbsde_paths::{
    girsanov_weight, scan_noise, simulate_forward, time_reversed_paths,
};
use proptest::prelude::*;

fn wide_grid(steps: usize) -> Grid {
    Grid::new(0.0, 1.0, steps, -12.0, 12.0, 16).unwrap()
}

#[test]
fn brownian_terminal_moments_match() {
    let grid = wide_grid(64);
    let x0 = 0.3;
    let n = 20_000;
    let e = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, x0, &grid, n, 101);
    let terminal = e.terminal_states();
    let mean = stats::mean(&terminal);
    let var = stats::variance(&terminal);
    let se_mean = (1.0f64 / n as f64).sqrt();
    let se_var = 1.0 * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!(
        (mean - x0).abs() <= 4.0 * se_mean,
        "terminal mean {mean:.4} vs {x0} (4se = {:.4})",
        4.0 * se_mean
    );
    assert!(
        (var - 1.0).abs() <= 4.0 * se_var,
        "terminal variance {var:.4} vs 1 (4se = {:.4})",
        4.0 * se_var
    );
    assert_eq!(e.exit_stats.exited_paths, 0, "domain wide enough not to clip");
}

#[test]
fn ou_terminal_moments_match() {
    // dX = −βX dt + dW from x0: X_T ~ N(x0 e^{−βT}, (1−e^{−2βT})/(2β)).
    // The Euler bias at dt = 1/64 is an order of magnitude below the
    // four-standard-error gates used here.
    let grid = wide_grid(64);
    let (beta, x0) = (1.3f64, 0.3f64);
    let n = 20_000;
    let e = simulate_forward(&|_, x| -beta * x, &|_, _| 1.0, x0, &grid, n, 55);
    let terminal = e.terminal_states();
    let target_mean = x0 * (-beta).exp();
    let target_var = (1.0 - (-2.0 * beta).exp()) / (2.0 * beta);
    let mean = stats::mean(&terminal);
    let var = stats::variance(&terminal);
    let se_mean = (target_var / n as f64).sqrt();
    let se_var = target_var * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!(
        (mean - target_mean).abs() <= 4.0 * se_mean,
        "OU mean {mean:.5} vs {target_mean:.5}"
    );
    assert!(
        (var - target_var).abs() <= 4.0 * se_var,
        "OU variance {var:.5} vs {target_var:.5}"
    );
}

#[test]
fn two_level_drift_self_converges_in_law() {
    // Discontinuous drift: −0.6 below the threshold, −1.1 at and above.
    // No smoothness theorem covers the jump, so accuracy is certified
    // by agreement in law with a sixteen-times finer run. The same seed
    // is used for both runs (common random numbers); the comparison is
    // purely distributional.
    let b = |_: f64, x: f64| if x < 0.2 { -0.6 } else { -1.1 };
    let s = |_: f64, _: f64| 1.0;
    let n = 10_000;
    let coarse_grid = wide_grid(128);
    let fine_grid = wide_grid(128 * 16);
    let coarse = simulate_forward(&b, &s, 0.0, &coarse_grid, n, 2024).terminal_states();
    let fine = simulate_forward(&b, &s, 0.0, &fine_grid, n, 2024).terminal_states();
    let ks = stats::ks_statistic_two_sample(&coarse, &fine).unwrap();
    let critical = stats::ks_two_sample_critical_1pct::<f64>(n, n);
    assert!(
        ks < critical,
        "KS {ks:.4} vs 1% critical {critical:.4} for the two-level drift"
    );
}

#[test]
fn strong_error_decays_at_first_order() {
    // Additive noise and Lipschitz drift give strong order one for the
    // Euler scheme. Coarse runs are coupled to a dt/16 reference by
    // aggregating the reference increments, and the measured order on a
    // dt-halving must be at least 0.9.
    let beta = 1.0f64;
    let n = 2_000;
    let mut errors = Vec::new();
    for coarse_steps in [32usize, 64] {
        let fine_steps = coarse_steps * 16;
        let fine_grid = wide_grid(fine_steps);
        let fine = simulate_forward(&|_, x| -beta * x, &|_, _| 1.0, 0.5, &fine_grid, n, 31);
        let coarse_dt = 1.0 / coarse_steps as f64;
        let mut sq_sum = 0.0;
        for p in 0..n {
            let dw_fine = fine.path_dw(p);
            let mut x = 0.5f64;
            for m in 0..coarse_steps {
                let dw: f64 = dw_fine[m * 16..(m + 1) * 16].iter().sum();
                x = x + (-beta * x) * coarse_dt + dw;
            }
            let diff = x - fine.path_x(p)[fine_steps];
            sq_sum += diff * diff;
        }
        errors.push((sq_sum / n as f64).sqrt());
    }
    let order = (errors[0] / errors[1]).log2();
    assert!(
        order >= 0.9,
        "strong order {order:.3} from errors {errors:?}"
    );
}

#[test]
fn girsanov_weights_have_unit_mean_and_lognormal_second_moment() {
    let grid = wide_grid(64);
    let c = 0.8f64;
    let n = 50_000;
    let e = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, 0.0, &grid, n, 808);
    let w = girsanov_weight(&e, &|_, _| c);
    let mean = stats::mean(&w);
    let se = stats::standard_error(&w);
    assert!(
        (mean - 1.0).abs() <= 4.0 * se,
        "weight mean {mean:.5} should be 1 within {:.5}",
        4.0 * se
    );
    let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
    let target = (c * c).exp();
    let mean_sq = stats::mean(&sq);
    let se_sq = stats::standard_error(&sq);
    assert!(
        (mean_sq - target).abs() <= 4.0 * se_sq,
        "weight second moment {mean_sq:.4} vs {target:.4} within {:.4}",
        4.0 * se_sq
    );
}

#[test]
fn reversed_increments_have_brownian_variance() {
    // dB columns away from the terminal have variance dt·(1 − dt/(T−τ)),
    // which sits inside a five-standard-error gate around dt on the
    // first half of the axis.
    let grid = wide_grid(64);
    let n = 4_000;
    let e = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, 0.0, &grid, n, 99);
    let r = time_reversed_paths(&e).unwrap();
    let dt = grid.dt();
    let se_var = dt * (2.0 / (n as f64 - 1.0)).sqrt();
    for m in (0..32).step_by(4) {
        let column: Vec<f64> = (0..n).map(|p| r.db_path(p)[m]).collect();
        let var = stats::variance(&column);
        assert!(
            (var - dt).abs() <= 5.0 * se_var,
            "dB column {m} variance {var:.6e} vs dt {dt:.6e}"
        );
        let mean = stats::mean(&column);
        assert!(
            mean.abs() <= 5.0 * (dt / n as f64).sqrt(),
            "dB column {m} mean {mean:.3e} not centered"
        );
    }
}

#[test]
fn determinism_is_independent_of_worker_count() {
    let grid = wide_grid(32);
    let b = |_: f64, x: f64| 0.2 - 0.5 * x;
    let s = |t: f64, _: f64| 1.0 + 0.1 * t;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let e = simulate_forward(&b, &s, 0.1, &grid, 501, 4242);
            let w = girsanov_weight(&e, &|_, x| 0.3 * x.tanh());
            (e, w)
        })
    };
    let (e1, w1) = run(1);
    let (e4, w4) = run(4);
    assert_eq!(e1.x_flat(), e4.x_flat());
    assert_eq!(e1.dw_flat(), e4.dw_flat());
    assert_eq!(w1, w4);
    assert_eq!(e1.summary(), e4.summary());
}

#[test]
fn increment_columns_pass_sanity_gate() {
    let grid = wide_grid(32);
    let e = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, 0.0, &grid, 8_000, 12);
    // With 32 columns and five-standard-error gates, any flag at all is
    // overwhelmingly unlikely under healthy sampling.
    assert_eq!(e.flagged_increment_columns(), 0);
}

#[test]
fn scan_streams_match_batch_boundaries() {
    // Batched streaming must not depend on the batch size.
    let grid = wide_grid(16);
    let small: Vec<f64> = scan_noise(&grid, 97, 6, 10, |p, dw| {
        dw.iter().sum::<f64>() + p as f64
    });
    let large: Vec<f64> = scan_noise(&grid, 97, 6, 64, |p, dw| {
        dw.iter().sum::<f64>() + p as f64
    });
    assert_eq!(small, large);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_path_starts_at_x0(seed in 0u64..1000, x0 in -3.0f64..3.0) {
        let grid = wide_grid(8);
        let e = simulate_forward(&|_, x| -x, &|_, _| 1.0, x0, &grid, 7, seed);
        for p in 0..7 {
            prop_assert_eq!(e.path_x(p)[0], x0);
        }
    }

    #[test]
    fn increments_regenerate_from_their_substream(seed in 0u64..1000, p in 0usize..9) {
        let grid = wide_grid(12);
        let e = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, 0.0, &grid, 9, seed);
        let mut replay = vec![0.0; 12];
        fbsde_paths::brownian_increments(&grid, seed, p as u64, &mut replay);
        prop_assert_eq!(e.path_dw(p), replay.as_slice());
    }
}
