//! The decoupling field and grid-function containers.
//!
//! A decoupling field `v(t, x)` turns the coupled forward–backward system
//! into a forward SDE plus a lookup: `Y_t = v(t, X_t)` and (for unit-free
//! gradients) `Z_t = σ(t, X_t)·v_x(t, X_t)`. This module holds the solved
//! field together with its first two spatial derivatives, the off-grid
//! evaluation rule (monotone cubic in space, linear in time — the cubic
//! cannot overshoot near kinks of discontinuous-coefficient models), and
//! the transformed autonomous drift
//!
//! ```text
//! b̃(t, x) = b(t, x, v(t, x), v_x(t, x)),
//! ```
//!
//! which is what the forward simulation actually integrates.

use std::io::Write;

use fbsde_core::interp::MonotoneCubic;
use fbsde_core::Grid;
use fbsde_models::ModelInstance;
use serde::{Deserialize, Serialize};

use crate::array2::Field2;
use crate::solver::IterationReport;

/// One monotone cubic per time row, for off-grid evaluation of a tabulated
/// field: cubic in `x` along each row, linear blend between adjacent rows
/// in `t`. Arguments are clamped to the grid rectangle.
#[derive(Debug, Clone)]
pub struct RowInterpolant {
    grid: Grid,
    rows: Vec<MonotoneCubic<f64>>,
}

impl RowInterpolant {
    /// Fits every time row of `values` over the grid's space nodes.
    pub fn fit(grid: &Grid, values: &Field2) -> Self {
        let x_nodes = grid.x_nodes();
        let rows = (0..values.n_rows())
            .map(|m| {
                MonotoneCubic::fit(&x_nodes, values.row(m))
                    .expect("grid nodes are strictly increasing and row lengths match")
            })
            .collect();
        Self { grid: *grid, rows }
    }

    /// Evaluates at `(t, x)`; both coordinates clamp to the grid.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let (m, frac) = self.grid.locate_t(t);
        let lo = self.rows[m].eval(x);
        if frac == 0.0 {
            return lo;
        }
        let hi = self.rows[m + 1].eval(x);
        lo + frac * (hi - lo)
    }

    /// Evaluates on the exact time row `m` (no time interpolation).
    pub fn eval_at_row(&self, m: usize, x: f64) -> f64 {
        self.rows[m].eval(x)
    }

    /// Spatial derivative of the interpolant at `(t, x)`.
    pub fn eval_space_derivative(&self, t: f64, x: f64) -> f64 {
        let (m, frac) = self.grid.locate_t(t);
        let lo = self.rows[m].eval_derivative(x);
        if frac == 0.0 {
            return lo;
        }
        let hi = self.rows[m + 1].eval_derivative(x);
        lo + frac * (hi - lo)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Central-difference gradient and Hessian of a tabulated field, with
/// second-order one-sided stencils at the boundary columns:
///
/// - interior: `v_x = (v_{j+1} − v_{j−1})/(2 dx)`,
///   `v_xx = (v_{j+1} − 2 v_j + v_{j−1})/dx²`;
/// - left edge: `v_x = (−3 v_0 + 4 v_1 − v_2)/(2 dx)`,
///   `v_xx = (2 v_0 − 5 v_1 + 4 v_2 − v_3)/dx²`; right edge mirrored.
///
/// Requires at least 4 space nodes.
pub fn gradient_and_hessian(values: &Field2, grid: &Grid) -> (Field2, Field2) {
    let (n_rows, n_cols) = values.shape();
    assert!(
        n_cols >= 4,
        "one-sided second-derivative stencils need at least 4 space nodes"
    );
    assert_eq!(n_cols, grid.n_space_nodes(), "field/grid column mismatch");
    let dx = grid.dx();
    let inv_2dx = 1.0 / (2.0 * dx);
    let inv_dx2 = 1.0 / (dx * dx);
    let mut gx = Field2::zeros(n_rows, n_cols);
    let mut gxx = Field2::zeros(n_rows, n_cols);
    for m in 0..n_rows {
        let v = values.row(m);
        let last = n_cols - 1;
        for j in 1..last {
            gx.set(m, j, (v[j + 1] - v[j - 1]) * inv_2dx);
            gxx.set(m, j, (v[j + 1] - 2.0 * v[j] + v[j - 1]) * inv_dx2);
        }
        gx.set(m, 0, (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv_2dx);
        gxx.set(m, 0, (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv_dx2);
        gx.set(
            m,
            last,
            (3.0 * v[last] - 4.0 * v[last - 1] + v[last - 2]) * inv_2dx,
        );
        gxx.set(
            m,
            last,
            (2.0 * v[last] - 5.0 * v[last - 1] + 4.0 * v[last - 2] - v[last - 3]) * inv_dx2,
        );
    }
    (gx, gxx)
}

/// Off-grid evaluation rule attached to solved fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpolationRule {
    /// Spatial rule between x-nodes.
    pub space: String,
    /// Temporal rule between t-nodes.
    pub time: String,
}

impl Default for InterpolationRule {
    /// The single rule used throughout: monotone cubic in x, linear in t.
    fn default() -> Self {
        Self {
            space: "monotone_cubic".into(),
            time: "linear".into(),
        }
    }
}

/// A solved decoupling field: values, first two spatial derivatives, and
/// fitted interpolants for each.
#[derive(Debug, Clone)]
pub struct DecouplingField {
    pub grid: Grid,
    pub v: Field2,
    pub v_x: Field2,
    pub v_xx: Field2,
    pub iteration_report: IterationReport,
    v_interp: RowInterpolant,
    vx_interp: RowInterpolant,
    vxx_interp: RowInterpolant,
}

impl DecouplingField {
    /// Assembles a field from solved values: derivatives by the difference
    /// stencils of [`gradient_and_hessian`], interpolants fitted per row.
    pub fn from_values(grid: Grid, v: Field2, iteration_report: IterationReport) -> Self {
        let (v_x, v_xx) = gradient_and_hessian(&v, &grid);
        let v_interp = RowInterpolant::fit(&grid, &v);
        let vx_interp = RowInterpolant::fit(&grid, &v_x);
        let vxx_interp = RowInterpolant::fit(&grid, &v_xx);
        Self {
            grid,
            v,
            v_x,
            v_xx,
            iteration_report,
            v_interp,
            vx_interp,
            vxx_interp,
        }
    }

    /// `v(t, x)` by the attached interpolation rule.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.v_interp.eval(t, x)
    }

    /// `v_x(t, x)` interpolated from the tabulated gradient.
    pub fn gradient(&self, t: f64, x: f64) -> f64 {
        self.vx_interp.eval(t, x)
    }

    /// `v_xx(t, x)` interpolated from the tabulated Hessian.
    pub fn hessian(&self, t: f64, x: f64) -> f64 {
        self.vxx_interp.eval(t, x)
    }

    /// `v` on the exact time row `m` at arbitrary `x`.
    pub fn value_at_row(&self, m: usize, x: f64) -> f64 {
        self.v_interp.eval_at_row(m, x)
    }

    /// `v_x` on the exact time row `m` at arbitrary `x`.
    pub fn gradient_at_row(&self, m: usize, x: f64) -> f64 {
        self.vx_interp.eval_at_row(m, x)
    }

    /// `v_xx` on the exact time row `m` at arbitrary `x`.
    pub fn hessian_at_row(&self, m: usize, x: f64) -> f64 {
        self.vxx_interp.eval_at_row(m, x)
    }

    /// Serializable description of the grid and evaluation rule.
    pub fn metadata(&self) -> FieldMetadata {
        FieldMetadata {
            t0: self.grid.t0,
            t_final: self.grid.t_final,
            n_time_steps: self.grid.n_time_steps,
            x_min: self.grid.x_min,
            x_max: self.grid.x_max,
            n_space_cells: self.grid.n_space_cells,
            interpolation: InterpolationRule::default(),
            sup_abs_v: self.v.max_abs(),
            sup_abs_v_x: self.v_x.max_abs(),
            sup_abs_v_xx: self.v_xx.max_abs(),
        }
    }

    /// Writes the field as CSV: header `t,x,v,v_x,v_xx`, one row per grid
    /// node in (time, space) order. Plain `Display` formatting keeps every
    /// value round-trip exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,v,v_x,v_xx")?;
        for m in 0..self.grid.n_time_nodes() {
            let t = self.grid.t_node(m);
            for j in 0..self.grid.n_space_nodes() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    t,
                    self.grid.x_node(j),
                    self.v.at(m, j),
                    self.v_x.at(m, j),
                    self.v_xx.at(m, j)
                )?;
            }
        }
        Ok(())
    }
}

/// Grid metadata and sup-norms for JSON export alongside the CSV table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldMetadata {
    pub t0: f64,
    pub t_final: f64,
    pub n_time_steps: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_space_cells: usize,
    pub interpolation: InterpolationRule,
    pub sup_abs_v: f64,
    pub sup_abs_v_x: f64,
    pub sup_abs_v_xx: f64,
}

/// A scalar function tabulated on a grid with the standard interpolation
/// rule attached — used for the transformed drift and the auxiliary
/// transform fields.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Field2,
    interp: RowInterpolant,
}

impl GridFunction {
    pub fn from_values(grid: Grid, values: Field2) -> Self {
        assert_eq!(values.n_rows(), grid.n_time_nodes());
        assert_eq!(values.n_cols(), grid.n_space_nodes());
        let interp = RowInterpolant::fit(&grid, &values);
        Self {
            grid,
            values,
            interp,
        }
    }

    /// Value at `(t, x)`; clamps to the grid rectangle.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.interp.eval(t, x)
    }

    /// Value at exact time row `m`, arbitrary `x`.
    pub fn eval_at_row(&self, m: usize, x: f64) -> f64 {
        self.interp.eval_at_row(m, x)
    }

    /// Spatial derivative of the interpolant at `(t, x)`.
    pub fn space_derivative(&self, t: f64, x: f64) -> f64 {
        self.interp.eval_space_derivative(t, x)
    }

    /// Largest `|value|` over the grid.
    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    /// Largest one-sided difference quotient `|Δvalue/Δx|` over all rows —
    /// a grid estimate of the spatial Lipschitz constant.
    pub fn max_abs_space_slope(&self) -> f64 {
        let dx = self.grid.dx();
        let mut sup: f64 = 0.0;
        for m in 0..self.values.n_rows() {
            let row = self.values.row(m);
            for j in 1..row.len() {
                sup = sup.max(((row[j] - row[j - 1]) / dx).abs());
            }
        }
        sup
    }
}

/// Tabulates the transformed autonomous drift
/// `b̃(t, x) = b(t, x, v(t, x), v_x(t, x))` on the field's own grid.
pub fn transformed_drift(field: &DecouplingField, model: &ModelInstance) -> GridFunction {
    let b = &model.coefficients.drift_b;
    let values = Field2::from_fn(
        field.grid.n_time_nodes(),
        field.grid.n_space_nodes(),
        |m, j| {
            let t = field.grid.t_node(m);
            let x = field.grid.x_node(j);
            b(t, x, field.v.at(m, j), field.v_x.at(m, j))
        },
    );
    GridFunction::from_values(field.grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n_t: usize, n_x: usize) -> Grid {
        Grid::new(0.0, 1.0, n_t, -2.0, 2.0, n_x).unwrap()
    }

    #[test]
    fn linear_field_has_unit_gradient_and_zero_hessian() {
        let g = grid(4, 8);
        let v = Field2::from_fn(g.n_time_nodes(), g.n_space_nodes(), |_, j| g.x_node(j));
        let (gx, gxx) = gradient_and_hessian(&v, &g);
        for m in 0..v.n_rows() {
            for j in 0..v.n_cols() {
                assert_abs_diff_eq!(gx.at(m, j), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(gxx.at(m, j), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_field_has_exact_hessian() {
        let g = grid(2, 16);
        let v = Field2::from_fn(g.n_time_nodes(), g.n_space_nodes(), |_, j| {
            let x = g.x_node(j);
            x * x
        });
        let (gx, gxx) = gradient_and_hessian(&v, &g);
        for m in 0..v.n_rows() {
            for j in 0..v.n_cols() {
                // Central and one-sided second-order stencils are exact on
                // quadratics.
                assert_abs_diff_eq!(gxx.at(m, j), 2.0, epsilon = 1e-9);
                assert_abs_diff_eq!(gx.at(m, j), 2.0 * g.x_node(j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn interpolant_reproduces_nodes_and_clamps() {
        let g = grid(4, 8);
        let v = Field2::from_fn(g.n_time_nodes(), g.n_space_nodes(), |m, j| {
            (m as f64) * 0.5 + g.x_node(j).sin()
        });
        let interp = RowInterpolant::fit(&g, &v);
        for m in 0..v.n_rows() {
            for j in 0..v.n_cols() {
                assert_abs_diff_eq!(
                    interp.eval(g.t_node(m), g.x_node(j)),
                    v.at(m, j),
                    epsilon = 1e-13
                );
            }
        }
        // Clamped outside the rectangle.
        assert_eq!(interp.eval(-5.0, -7.0), interp.eval(0.0, -2.0));
        assert_eq!(interp.eval(5.0, 7.0), interp.eval(1.0, 2.0));
    }

    #[test]
    fn time_interpolation_is_linear() {
        let g = grid(2, 8);
        let v = Field2::from_fn(g.n_time_nodes(), g.n_space_nodes(), |m, _| m as f64);
        let interp = RowInterpolant::fit(&g, &v);
        // Rows are the constants 0, 1, 2; value at t=0.25 (halfway between
        // rows 0 and 1 of the 2-step grid) must be 0.5.
        assert_abs_diff_eq!(interp.eval(0.25, 0.0), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn grid_function_slope_estimate() {
        let g = grid(2, 10);
        let f = GridFunction::from_values(
            g,
            Field2::from_fn(g.n_time_nodes(), g.n_space_nodes(), |_, j| {
                3.0 * g.x_node(j)
            }),
        );
        assert_abs_diff_eq!(f.max_abs_space_slope(), 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.space_derivative(0.5, 0.3), 3.0, epsilon = 1e-9);
    }
}
