//! Oracle tests for reconstruction, residuals, and ordering.
//!
//! The residual refinement study and the corrupted-integrand negative
//! control certify that the backward audit actually measures solution
//! quality; the ordering experiments replay the sign and dominance
//! conclusions that hold for monotone terminal data.

use fbsde_core::Grid;
use fbsde_field::{solve_decoupling_field, SolverConfig};
use fbsde_models::{builtin_worked_example, model_from_json_str, sigmoid, ModelInstance};
use fbsde_paths::simulate_forward;
use fbsde_triple::{
    bsde_residual, comonotonicity_check, comparison_check, field_coupled_drift,
    reconstruct_triple, TripleEnsemble,
};

/// Worked example on a wide domain so path excursions never reach the
/// tabulated boundary.
fn worked_example_field(steps: usize) -> (ModelInstance, fbsde_field::DecouplingField, Grid) {
    let model = builtin_worked_example();
    let grid = Grid::new(0.0, 1.0, steps, -9.0, 9.0, 300).unwrap();
    let field = solve_decoupling_field(&model, &grid, &SolverConfig::default()).unwrap();
    (model, field, grid)
}

fn worked_example_triple(
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> (ModelInstance, fbsde_paths::PathEnsemble, TripleEnsemble) {
    let (model, field, grid) = worked_example_field(steps);
    let ensemble = {
        let drift = field_coupled_drift(&model, &field);
        simulate_forward(&drift, &|_, _| 1.0, 0.0, &grid, n_paths, seed)
    };
    let triple = reconstruct_triple(&field, &ensemble, &|_, _| 1.0).unwrap();
    (model, ensemble, triple)
}

#[test]
fn terminal_identity_holds_to_interpolation_error() {
    let (_, ensemble, triple) = worked_example_triple(64, 2_000, 42);
    let nodes = triple.n_nodes();
    let mut sup = 0.0f64;
    for p in 0..triple.n_paths {
        let xt = ensemble.path_x(p)[nodes - 1];
        let gap = (triple.path_y(p)[nodes - 1] - sigmoid(xt)).abs();
        sup = sup.max(gap);
    }
    assert!(sup <= 1e-4, "terminal identity gap {sup:.2e}");
}

#[test]
fn integrand_is_positive_for_increasing_terminal() {
    let (_, _, triple) = worked_example_triple(64, 2_000, 42);
    assert!(
        triple.min_z() > 0.0,
        "min Z = {:.3e}, expected strictly positive",
        triple.min_z()
    );
}

#[test]
fn y_is_bounded_by_the_field_sup() {
    let (_, _, triple) = worked_example_triple(64, 2_000, 42);
    let bound = triple.field_metadata.sup_abs_v;
    assert!(
        triple.sup_abs_y() <= bound,
        "sup |Y| = {:.6} exceeds field bound {:.6}",
        triple.sup_abs_y(),
        bound
    );
}

#[test]
fn constant_data_has_vanishing_residual() {
    let text = r#"{ "model": { "inline": {
        "drift": { "kind": "constant", "value": 0.0 },
        "terminal": { "kind": "constant", "value": 0.75 },
        "horizon": 1.0 } } }"#;
    let model = model_from_json_str(text).unwrap().instance;
    let grid = Grid::new(0.0, 1.0, 32, -6.0, 6.0, 60).unwrap();
    let field = solve_decoupling_field(&model, &grid, &SolverConfig::default()).unwrap();
    let ensemble = simulate_forward(&|_, _| 0.0, &|_, _| 1.0, 0.0, &grid, 500, 7);
    let triple = reconstruct_triple(&field, &ensemble, &|_, _| 1.0).unwrap();
    let stats = bsde_residual(&triple, &model, &ensemble).unwrap();
    assert!(
        stats.sup_abs <= 1e-8,
        "constant-data residual {:.2e} should be pure accumulation noise",
        stats.sup_abs
    );
}

#[test]
fn residual_decays_under_time_refinement() {
    let mut means = Vec::new();
    for steps in [50usize, 100, 200] {
        let (model, ensemble, triple) = worked_example_triple(steps, 4_000, 314);
        let stats = bsde_residual(&triple, &model, &ensemble).unwrap();
        means.push(stats.mean_abs);
    }
    let order_a = (means[0] / means[1]).log2();
    let order_b = (means[1] / means[2]).log2();
    assert!(
        order_a >= 0.4 && order_b >= 0.4,
        "residual orders {order_a:.2}, {order_b:.2} from means {means:?}"
    );
}

#[test]
fn corrupted_integrand_is_loud() {
    let (model, ensemble, triple) = worked_example_triple(200, 4_000, 314);
    let clean = bsde_residual(&triple, &model, &ensemble).unwrap();

    let nodes = triple.n_nodes();
    let n = triple.n_paths;
    let mut x = Vec::with_capacity(n * nodes);
    let mut y = Vec::with_capacity(n * nodes);
    let mut z = Vec::with_capacity(n * nodes);
    for p in 0..n {
        x.extend_from_slice(triple.path_x(p));
        y.extend_from_slice(triple.path_y(p));
        z.extend(triple.path_z(p).iter().map(|v| 2.0 * v));
    }
    let corrupted = TripleEnsemble::from_parts(
        triple.grid,
        triple.field_metadata.clone(),
        triple.seed,
        triple.scheme.clone(),
        n,
        x,
        y,
        z,
    );
    let loud = bsde_residual(&corrupted, &model, &ensemble).unwrap();
    assert!(
        loud.mean_abs >= 10.0 * clean.mean_abs,
        "corrupted mean {:.3e} vs clean {:.3e}",
        loud.mean_abs,
        clean.mean_abs
    );
}

/// Pure-diffusion model with the given terminal condition.
fn heat_model(terminal: &str) -> ModelInstance {
    let text = format!(
        r#"{{ "model": {{ "inline": {{
            "drift": {{ "kind": "constant", "value": 0.0 }},
            "terminal": {terminal},
            "horizon": 1.0 }} }} }}"#
    );
    model_from_json_str(&text).unwrap().instance
}

#[test]
fn increasing_terminals_give_comonotone_integrands() {
    let model1 = builtin_worked_example();
    let model2 = heat_model(r#"{ "kind": "sigmoid" }"#);
    let grid = Grid::new(0.0, 1.0, 64, -9.0, 9.0, 150).unwrap();
    let report =
        comonotonicity_check(&model1, &model2, &grid, 2_000, 99, &SolverConfig::default())
            .unwrap();
    assert!(
        report.min_product >= -1e-8,
        "min Z¹Z² = {:.3e}",
        report.min_product
    );
    assert_eq!(report.fraction_negative, 0.0);
    assert!(report.fraction_positive > 0.9, "products should be mostly positive");
}

#[test]
fn opposite_monotonicity_flips_the_products() {
    let model1 = builtin_worked_example();
    // Strictly decreasing terminal: v_x < 0 everywhere under pure
    // diffusion, so every product pairs opposite signs.
    let model2 = heat_model(r#"{ "kind": "polynomial", "coefficients": [0.0, -0.1] }"#);
    let grid = Grid::new(0.0, 1.0, 64, -9.0, 9.0, 150).unwrap();
    let report =
        comonotonicity_check(&model1, &model2, &grid, 2_000, 99, &SolverConfig::default())
            .unwrap();
    assert!(
        report.max_product <= 1e-8,
        "max Z¹Z² = {:.3e}",
        report.max_product
    );
    assert_eq!(report.fraction_positive, 0.0);
}

#[test]
fn constant_second_terminal_gives_zero_products() {
    let model1 = builtin_worked_example();
    let model2 = heat_model(r#"{ "kind": "constant", "value": 0.4 }"#);
    let grid = Grid::new(0.0, 1.0, 32, -9.0, 9.0, 100).unwrap();
    let report =
        comonotonicity_check(&model1, &model2, &grid, 500, 5, &SolverConfig::default()).unwrap();
    assert!(report.min_product.abs() <= 1e-8);
    assert!(report.max_product.abs() <= 1e-8);
}

/// Worked-example coefficients with the terminal shifted by `delta`.
fn shifted_worked_example(delta: f64) -> ModelInstance {
    let base = builtin_worked_example();
    let mut coefficients = base.coefficients.clone();
    coefficients.terminal_phi =
        std::sync::Arc::new(move |x: f64| sigmoid(x) + delta);
    ModelInstance::new(coefficients, base.x0, base.horizon_t, base.t0).unwrap()
}

#[test]
fn identical_models_compare_exactly() {
    let model = builtin_worked_example();
    let grid = Grid::new(0.0, 1.0, 40, -7.0, 7.0, 80).unwrap();
    let report =
        comparison_check(&model, &model, &grid, &SolverConfig::default(), 0.0).unwrap();
    assert_eq!(report.fraction_ordered, 1.0);
    assert_eq!(report.max_excess, 0.0);
}

#[test]
fn dominating_terminal_dominates_everywhere() {
    let model1 = builtin_worked_example();
    let model2 = shifted_worked_example(0.1);
    let grid = Grid::new(0.0, 1.0, 40, -7.0, 7.0, 80).unwrap();
    let report =
        comparison_check(&model1, &model2, &grid, &SolverConfig::default(), 1e-8).unwrap();
    assert_eq!(
        report.fraction_ordered, 1.0,
        "max excess {:.3e}",
        report.max_excess
    );

    // Negative control: the reversed pair violates the hypothesis and
    // the audit must see it.
    let reversed =
        comparison_check(&model2, &model1, &grid, &SolverConfig::default(), 1e-8).unwrap();
    assert!(
        reversed.fraction_ordered < 1.0,
        "reversed ordering should fail somewhere"
    );
    assert!(reversed.max_excess > 0.05);
}
