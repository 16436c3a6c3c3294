//! Backward-in-time finite-difference solvers.
//!
//! Two terminal-value problems share one discretization:
//!
//! - the quasi-linear decoupling-field equation
//!   `∂_t v + ½σ²(t,x) v_xx + b(t,x,v,v_x)·v_x + f(t,x,v,v_x) = 0`,
//!   `v(T,·) = φ`, stepped backward semi-implicitly: the diffusion term is
//!   treated by trapezoidal (Crank–Nicolson) averaging with the implicit
//!   half a tridiagonal solve, the nonlinearities are frozen at a damped
//!   Picard iterate re-frozen until the slice stops moving, and the first
//!   few backward steps are integrated fully implicitly to damp any kinks
//!   in the terminal data before the second-order averaging takes over;
//! - the linear auxiliary equation
//!   `∂_t U + ½σ² U_xx + b̃·U_x − μU = −b̃`, `U(T,·) = 0`, where the drift
//!   is a known grid function, so one fully implicit solve per step
//!   suffices (first order in time, and deliberately so: the tabulated
//!   drifts this equation removes are often discontinuous, where
//!   trapezoidal averaging would ring).
//!
//! Space truncation uses zero-curvature (linear extrapolation) boundaries:
//! the discrete second difference at the edge columns is pinned to zero,
//! which folds the edge unknowns into the first and last interior rows and
//! keeps the system tridiagonal. The truncation is felt within a heat
//! length of the edges, so domains should extend at least
//! `6·σ_max·√T + (drift sweep)` beyond any region whose values are
//! consumed downstream. An explicit scheme is available for cross-checks;
//! it refuses to run outside its stability region.
//!
//! ## Coefficients with jumps
//!
//! Switching coefficients (a drift level that jumps as `y` crosses a
//! threshold) admit no discrete fixed point at a node whose value lands
//! inside the dt-wide flip window: the two branch solutions bracket the
//! threshold and the Picard map cycles between them. The loop detects the
//! resulting residual plateau and accepts the best iterate when the
//! plateau is below a configured fraction of `dt` — the ambiguity is of
//! the same order as the scheme's own truncation error. Accepted plateaus
//! are recorded per time step in the iteration report; genuine divergence
//! still fails.

use fbsde_core::tridiag::{TridiagError, TridiagWorkspace};
use fbsde_core::Grid;
use fbsde_models::{ModelInstance, TimeSpaceFn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array2::Field2;
use crate::decoupling::{gradient_and_hessian, DecouplingField, GridFunction, RowInterpolant};

/// Failures of the PDE stage.
#[derive(Debug, Error)]
pub enum FieldError {
    /// The damped Picard loop moved away from a fixed point (three
    /// consecutive residual increases) or ran out of iterations.
    #[error("Picard iteration diverged solving time index {time_index}: {detail}")]
    PicardDiverged { time_index: usize, detail: String },
    /// Explicit scheme requested outside its stability region.
    #[error("explicit scheme unstable: sigma^2 dt/dx^2 = {ratio} exceeds 1/2")]
    CFLViolation { ratio: f64 },
    /// Grid/model disagreement or an unusable grid.
    #[error("domain error: {0}")]
    Domain(String),
    /// Tridiagonal elimination hit a singular pivot.
    #[error(transparent)]
    LinearSolve(#[from] TridiagError),
}

/// Time-stepping scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Implicit diffusion, Picard-frozen nonlinearities (default).
    SemiImplicit,
    /// Fully explicit update; guarded by the stability check.
    Explicit,
}

/// Optional a-priori gradient-bound audit: checks
/// `sup |v_x|·(T−t)^{1−γ} ≤ constant` over interior columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundCheck {
    /// Exponent γ ∈ (0, 1]; the blow-up allowance near the terminal time.
    pub gamma: f64,
    /// Bounding constant to audit against.
    pub constant: f64,
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Picard iteration cap per time step.
    pub picard_max_iterations: usize,
    /// Damping factor θ of the update `w ← w + θ(G(w) − w)`.
    pub picard_damping: f64,
    /// Sup-norm stopping tolerance on `|G(w) − w|`.
    pub picard_tolerance: f64,
    /// Backward steps next to the terminal slice integrated fully
    /// implicitly before trapezoidal averaging starts (damps kinked
    /// terminal data; 0 disables).
    pub damped_startup_steps: usize,
    /// Plateau acceptance window: iterations without residual improvement
    /// before a stalled step may be accepted.
    pub stagnation_window: usize,
    /// A stalled step is accepted only if its best residual is at most
    /// this fraction of `dt` (the flip-window width of a switching
    /// coefficient is `O(dt)`, the same order as the scheme error).
    pub stagnation_dt_fraction: f64,
    /// Optional gradient-bound audit, recorded in the iteration report.
    pub gradient_bound: Option<GradientBoundCheck>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            picard_max_iterations: 50,
            picard_damping: 0.5,
            picard_tolerance: 1e-10,
            damped_startup_steps: 2,
            stagnation_window: 10,
            stagnation_dt_fraction: 0.5,
            gradient_bound: None,
        }
    }
}

/// Result of the gradient-bound audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub gamma: f64,
    pub constant: f64,
    /// `sup |v_x|·(T−t)^{1−γ}` over interior columns, `t < T`.
    pub sup_scaled_gradient: f64,
    pub passed: bool,
    /// Exponent best fitting `sup_x |v_x(t,·)| ∝ (T−t)^{γ−1}` by least
    /// squares in log-log coordinates; `None` when the profile degenerates.
    pub best_fit_gamma: Option<f64>,
}

/// Per-solve diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Picard iterations used at each time step (index = time node solved).
    pub picard_iterations: Vec<usize>,
    /// Final Picard residual at each time step.
    pub final_residuals: Vec<f64>,
    /// Largest final residual over all steps.
    pub max_residual: f64,
    /// Time steps accepted at a residual plateau instead of the tolerance
    /// (switching coefficients; see the module docs). Empty for smooth
    /// models.
    pub stagnated_steps: Vec<usize>,
    pub gradient_bound: Option<GradientBoundReport>,
}

impl IterationReport {
    /// Empty report for fields assembled directly from tabulated values.
    pub fn empty() -> Self {
        Self {
            picard_iterations: Vec::new(),
            final_residuals: Vec::new(),
            max_residual: 0.0,
            stagnated_steps: Vec::new(),
            gradient_bound: None,
        }
    }
}

/// First spatial derivative of one row by the standard stencils: central
/// differences inside, second-order one-sided at the edges.
pub(crate) fn space_gradient_row(v: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len();
    debug_assert!(n >= 3 && out.len() == n);
    let inv_2dx = 1.0 / (2.0 * dx);
    for j in 1..n - 1 {
        out[j] = (v[j + 1] - v[j - 1]) * inv_2dx;
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv_2dx;
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv_2dx;
}

fn check_grid_against_model(model: &ModelInstance, grid: &Grid) -> Result<(), FieldError> {
    if grid.n_space_nodes() < 4 {
        return Err(FieldError::Domain(
            "need at least 4 space nodes for the boundary stencils".into(),
        ));
    }
    if grid.t0 != model.t0 || grid.t_final != model.horizon_t {
        return Err(FieldError::Domain(format!(
            "grid time axis [{}, {}] must match the model's [{}, {}]",
            grid.t0, grid.t_final, model.t0, model.horizon_t
        )));
    }
    if !(grid.x_min < model.x0 && model.x0 < grid.x_max) {
        return Err(FieldError::Domain(format!(
            "model x0 = {} must lie strictly inside [{}, {}]",
            model.x0, grid.x_min, grid.x_max
        )));
    }
    Ok(())
}

/// Solves the decoupling-field terminal value problem on `grid`.
///
/// The terminal slice is `φ` sampled at the space nodes bit-for-bit. Each
/// backward step solves the implicit-diffusion system with `b·v_x + f`
/// frozen at the current Picard iterate, re-freezing until the sup-norm
/// update falls below the configured tolerance.
pub fn solve_decoupling_field(
    model: &ModelInstance,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<DecouplingField, FieldError> {
    check_grid_against_model(model, grid)?;
    let nm = grid.n_time_nodes();
    let nj = grid.n_space_nodes();
    let dt = grid.dt();
    let dx = grid.dx();
    let x = grid.x_nodes();
    let coeffs = &model.coefficients;

    let mut v = Field2::zeros(nm, nj);
    for j in 0..nj {
        v.set(nm - 1, j, (coeffs.terminal_phi)(x[j]));
    }

    let steps = nm - 1;
    let mut picard_iterations = vec![0usize; steps];
    let mut final_residuals = vec![0.0f64; steps];
    let mut stagnated_steps: Vec<usize> = Vec::new();

    match cfg.scheme {
        Scheme::SemiImplicit => {
            let n = nj - 2;
            let mut ws = TridiagWorkspace::new(n);
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs_fixed = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut sol = vec![0.0; n];
            let mut w = vec![0.0; nj];
            let mut wx = vec![0.0; nj];
            let mut u = vec![0.0; nj];
            let mut u_best = vec![0.0; nj];
            let plateau_cap = cfg.stagnation_dt_fraction * dt;

            for m in (0..steps).rev() {
                let t = grid.t_node(m);
                let t_known = grid.t_node(m + 1);
                // Trapezoidal averaging, except fully implicit for the
                // first backward steps next to the terminal slice.
                let steps_from_terminal = steps - 1 - m;
                let theta = if steps_from_terminal < cfg.damped_startup_steps {
                    1.0
                } else {
                    0.5
                };

                for i in 0..n {
                    let j = i + 1;
                    let s = (coeffs.diffusion_sigma)(t, x[j]);
                    let r = theta * dt * s * s / (2.0 * dx * dx);
                    sub[i] = -r;
                    diag[i] = 1.0 + 2.0 * r;
                    sup[i] = -r;
                }
                // Zero-curvature fold: eliminate the edge unknowns.
                diag[0] += 2.0 * sub[0];
                sup[0] -= sub[0];
                diag[n - 1] += 2.0 * sup[n - 1];
                sub[n - 1] -= sup[n - 1];

                // Known-level contribution: previous slice plus the
                // explicit halves of diffusion and nonlinearity.
                let prev = v.row(m + 1).to_vec();
                space_gradient_row(&prev, dx, &mut wx);
                let explicit_weight = (1.0 - theta) * dt;
                for i in 0..n {
                    let j = i + 1;
                    let mut fixed = prev[j];
                    if explicit_weight > 0.0 {
                        let s = (coeffs.diffusion_sigma)(t_known, x[j]);
                        let curv = (prev[j + 1] - 2.0 * prev[j] + prev[j - 1]) / (dx * dx);
                        let bb = (coeffs.drift_b)(t_known, x[j], prev[j], wx[j]);
                        let ff = (coeffs.driver_f)(t_known, x[j], prev[j], wx[j]);
                        fixed += explicit_weight * (0.5 * s * s * curv + bb * wx[j] + ff);
                    }
                    rhs_fixed[i] = fixed;
                }

                w.copy_from_slice(&prev);
                let mut last_residual = f64::INFINITY;
                let mut best_residual = f64::INFINITY;
                let mut since_improvement = 0usize;
                let mut growth = 0usize;
                let mut converged = false;
                let mut stagnated = false;
                let implicit_weight = theta * dt;

                for k in 1..=cfg.picard_max_iterations {
                    space_gradient_row(&w, dx, &mut wx);
                    for i in 0..n {
                        let j = i + 1;
                        let bb = (coeffs.drift_b)(t, x[j], w[j], wx[j]);
                        let ff = (coeffs.driver_f)(t, x[j], w[j], wx[j]);
                        rhs[i] = rhs_fixed[i] + implicit_weight * (bb * wx[j] + ff);
                    }
                    ws.solve(&sub[1..], &diag, &sup[..n - 1], &rhs, &mut sol)?;
                    u[1..nj - 1].copy_from_slice(&sol);
                    u[0] = 2.0 * u[1] - u[2];
                    u[nj - 1] = 2.0 * u[nj - 2] - u[nj - 3];

                    let mut residual: f64 = 0.0;
                    for j in 0..nj {
                        residual = residual.max((u[j] - w[j]).abs());
                    }
                    picard_iterations[m] = k;
                    final_residuals[m] = residual;

                    if residual <= cfg.picard_tolerance {
                        converged = true;
                        break;
                    }
                    if residual < best_residual * (1.0 - 1e-3) {
                        best_residual = residual;
                        u_best.copy_from_slice(&u);
                        since_improvement = 0;
                    } else {
                        best_residual = best_residual.min(residual);
                        since_improvement += 1;
                    }
                    if since_improvement >= cfg.stagnation_window && best_residual <= plateau_cap
                    {
                        stagnated = true;
                        break;
                    }
                    if residual > last_residual {
                        growth += 1;
                        if growth >= 3 {
                            return Err(FieldError::PicardDiverged {
                                time_index: m,
                                detail: format!(
                                    "residual grew for 3 consecutive iterations \
                                     (reached {residual:.3e})"
                                ),
                            });
                        }
                    } else {
                        growth = 0;
                    }
                    last_residual = residual;
                    for j in 0..nj {
                        w[j] += cfg.picard_damping * (u[j] - w[j]);
                    }
                }
                if converged {
                    v.set_row(m, &u);
                } else if stagnated || best_residual <= plateau_cap {
                    // Switching coefficient stuck in its flip window: the
                    // plateau is the scheme's own O(dt) ambiguity. Accept
                    // the best iterate and record the step.
                    final_residuals[m] = best_residual;
                    stagnated_steps.push(m);
                    v.set_row(m, &u_best);
                } else {
                    return Err(FieldError::PicardDiverged {
                        time_index: m,
                        detail: format!(
                            "no convergence within {} iterations (best residual {:.3e} \
                             above the plateau acceptance cap {:.3e})",
                            cfg.picard_max_iterations, best_residual, plateau_cap
                        ),
                    });
                }
            }
            stagnated_steps.reverse();
        }
        Scheme::Explicit => {
            let mut wx = vec![0.0; nj];
            let mut u = vec![0.0; nj];
            for m in (0..steps).rev() {
                let t = grid.t_node(m + 1);
                let mut ratio: f64 = 0.0;
                for &xj in &x {
                    let s = (coeffs.diffusion_sigma)(t, xj);
                    ratio = ratio.max(s * s * dt / (dx * dx));
                }
                if ratio > 0.5 {
                    return Err(FieldError::CFLViolation { ratio });
                }
                let prev = v.row(m + 1).to_vec();
                space_gradient_row(&prev, dx, &mut wx);
                for j in 1..nj - 1 {
                    let s = (coeffs.diffusion_sigma)(t, x[j]);
                    let wxx = (prev[j + 1] - 2.0 * prev[j] + prev[j - 1]) / (dx * dx);
                    let bb = (coeffs.drift_b)(t, x[j], prev[j], wx[j]);
                    let ff = (coeffs.driver_f)(t, x[j], prev[j], wx[j]);
                    u[j] = prev[j] + dt * (0.5 * s * s * wxx + bb * wx[j] + ff);
                }
                u[0] = 2.0 * u[1] - u[2];
                u[nj - 1] = 2.0 * u[nj - 2] - u[nj - 3];
                picard_iterations[m] = 1;
                final_residuals[m] = 0.0;
                v.set_row(m, &u);
            }
        }
    }

    let max_residual = final_residuals.iter().fold(0.0f64, |a, &b| a.max(b));
    let gradient_bound = cfg.gradient_bound.map(|check| {
        let (v_x, _) = gradient_and_hessian(&v, grid);
        gradient_bound_report(&v_x, grid, &check)
    });
    let report = IterationReport {
        picard_iterations,
        final_residuals,
        max_residual,
        stagnated_steps,
        gradient_bound,
    };
    Ok(DecouplingField::from_values(*grid, v, report))
}

/// Audits `sup_j |v_x(t, x_j)|·(T−t)^{1−γ} ≤ constant` over interior
/// columns and fits the empirically best exponent by log-log least squares.
pub fn gradient_bound_report(
    v_x: &Field2,
    grid: &Grid,
    check: &GradientBoundCheck,
) -> GradientBoundReport {
    let nm = v_x.n_rows();
    let nj = v_x.n_cols();
    let mut sup_scaled: f64 = 0.0;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for m in 0..nm {
        let gap = grid.t_final - grid.t_node(m);
        if gap <= 0.0 {
            continue;
        }
        let mut row_sup: f64 = 0.0;
        for j in 1..nj - 1 {
            row_sup = row_sup.max(v_x.at(m, j).abs());
        }
        sup_scaled = sup_scaled.max(row_sup * gap.powf(1.0 - check.gamma));
        if row_sup > 0.0 {
            pts.push((gap.ln(), row_sup.ln()));
        }
    }
    let best_fit_gamma = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        let sxy: f64 = pts
            .iter()
            .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
            .sum();
        if sxx > 0.0 {
            // sup|v_x| ∝ (T−t)^{γ−1}: the log-log slope is γ−1.
            Some(1.0 + sxy / sxx)
        } else {
            None
        }
    } else {
        None
    };
    GradientBoundReport {
        gamma: check.gamma,
        constant: check.constant,
        sup_scaled_gradient: sup_scaled,
        passed: sup_scaled <= check.constant,
        best_fit_gamma,
    }
}

/// Solution of the auxiliary linear equation: `u` and its tabulated
/// central-difference gradient `du`, each with fitted interpolants.
#[derive(Debug, Clone)]
pub struct KolmogorovSolution {
    pub grid: Grid,
    pub u: Field2,
    pub du: Field2,
    u_interp: RowInterpolant,
    du_interp: RowInterpolant,
}

impl KolmogorovSolution {
    /// `U(t, x)`.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.u_interp.eval(t, x)
    }

    /// `DU(t, x)` interpolated from the tabulated gradient.
    pub fn gradient(&self, t: f64, x: f64) -> f64 {
        self.du_interp.eval(t, x)
    }

    /// `U` on exact time row `m`.
    pub fn value_at_row(&self, m: usize, x: f64) -> f64 {
        self.u_interp.eval_at_row(m, x)
    }

    /// `DU` on exact time row `m`.
    pub fn gradient_at_row(&self, m: usize, x: f64) -> f64 {
        self.du_interp.eval_at_row(m, x)
    }

    /// `sup |DU|` over the grid.
    pub fn max_abs_gradient(&self) -> f64 {
        self.du.max_abs()
    }
}

/// Solves `∂_t U + ½σ² U_xx + b̃·U_x − μU = −b̃`, `U(T,·) = 0`, fully
/// implicitly (the equation is linear, so each backward step is one
/// tridiagonal solve with the advection folded into the matrix).
pub fn solve_kolmogorov_u(
    b_tilde: &GridFunction,
    sigma: &TimeSpaceFn,
    mu: f64,
    grid: &Grid,
) -> Result<KolmogorovSolution, FieldError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(FieldError::Domain(format!(
            "decay rate mu = {mu} must be positive and finite"
        )));
    }
    if b_tilde.grid != *grid {
        return Err(FieldError::Domain(
            "drift grid function must be tabulated on the solve grid".into(),
        ));
    }
    if grid.n_space_nodes() < 4 {
        return Err(FieldError::Domain(
            "need at least 4 space nodes for the boundary stencils".into(),
        ));
    }
    let nm = grid.n_time_nodes();
    let nj = grid.n_space_nodes();
    let dt = grid.dt();
    let dx = grid.dx();
    let x = grid.x_nodes();

    let mut u = Field2::zeros(nm, nj);
    let n = nj - 2;
    let mut ws = TridiagWorkspace::new(n);
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut sol = vec![0.0; n];
    let mut row = vec![0.0; nj];

    for m in (0..nm - 1).rev() {
        let t = grid.t_node(m);
        for i in 0..n {
            let j = i + 1;
            let s = sigma(t, x[j]);
            let r = dt * s * s / (2.0 * dx * dx);
            let q = dt * b_tilde.values.at(m, j) / (2.0 * dx);
            sub[i] = -r + q;
            diag[i] = 1.0 + 2.0 * r + mu * dt;
            sup[i] = -r - q;
            rhs[i] = u.at(m + 1, j) + dt * b_tilde.values.at(m, j);
        }
        diag[0] += 2.0 * sub[0];
        sup[0] -= sub[0];
        diag[n - 1] += 2.0 * sup[n - 1];
        sub[n - 1] -= sup[n - 1];

        ws.solve(&sub[1..], &diag, &sup[..n - 1], &rhs, &mut sol)?;
        row[1..nj - 1].copy_from_slice(&sol);
        row[0] = 2.0 * row[1] - row[2];
        row[nj - 1] = 2.0 * row[nj - 2] - row[nj - 3];
        u.set_row(m, &row);
    }

    let (du, _) = gradient_and_hessian(&u, grid);
    let u_interp = RowInterpolant::fit(grid, &u);
    let du_interp = RowInterpolant::fit(grid, &du);
    Ok(KolmogorovSolution {
        grid: *grid,
        u,
        du,
        u_interp,
        du_interp,
    })
}
