//! Uniform space-time mesh shared by the PDE solver and the Monte Carlo
//! engine.
//!
//! Time nodes are `t0 = t_0 < t_1 < ... < t_M = t_final` with step `dt`;
//! space nodes are `x_min = x_0 < ... < x_J = x_max` with step `dx`. Nodes
//! are always derived from the bounds and counts (never stored), so two
//! grids with equal parameters produce bit-identical node values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Errors from grid construction.
#[derive(Debug, Error)]
pub enum GridError {
    /// Zero step counts or inverted bounds.
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Uniform rectangular mesh on `[t0, t_final] x [x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid<T> {
    /// Initial time (inclusive).
    pub t0: T,
    /// Terminal time (inclusive).
    pub t_final: T,
    /// Number of time steps; there are `n_time_steps + 1` time nodes.
    pub n_time_steps: usize,
    /// Left spatial boundary.
    pub x_min: T,
    /// Right spatial boundary.
    pub x_max: T,
    /// Number of spatial cells; there are `n_space_cells + 1` space nodes.
    pub n_space_cells: usize,
}

impl<T: Real> SpaceTimeGrid<T> {
    /// Builds a grid, validating positivity of both extents.
    pub fn new(
        t0: T,
        t_final: T,
        n_time_steps: usize,
        x_min: T,
        x_max: T,
        n_space_cells: usize,
    ) -> Result<Self, GridError> {
        if !(t_final > t0) {
            return Err(GridError::Invalid(format!(
                "time interval must be increasing: t0={t0}, t_final={t_final}"
            )));
        }
        if !(x_max > x_min) {
            return Err(GridError::Invalid(format!(
                "space interval must be increasing: x_min={x_min}, x_max={x_max}"
            )));
        }
        if n_time_steps == 0 || n_space_cells < 2 {
            return Err(GridError::Invalid(format!(
                "need at least 1 time step and 2 space cells, got {n_time_steps} and {n_space_cells}"
            )));
        }
        let grid = Self {
            t0,
            t_final,
            n_time_steps,
            x_min,
            x_max,
            n_space_cells,
        };
        if !(grid.dt() > T::zero()) || !(grid.dx() > T::zero()) {
            return Err(GridError::Invalid("degenerate step size".into()));
        }
        Ok(grid)
    }

    /// Time step `(t_final - t0) / n_time_steps`.
    pub fn dt(&self) -> T {
        (self.t_final - self.t0) / T::of_usize(self.n_time_steps)
    }

    /// Space step `(x_max - x_min) / n_space_cells`.
    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::of_usize(self.n_space_cells)
    }

    /// Number of time nodes, `n_time_steps + 1`.
    pub fn n_time_nodes(&self) -> usize {
        self.n_time_steps + 1
    }

    /// Number of space nodes, `n_space_cells + 1`.
    pub fn n_space_nodes(&self) -> usize {
        self.n_space_cells + 1
    }

    /// The `m`-th time node (`m` in `0..=n_time_steps`).
    pub fn t_node(&self, m: usize) -> T {
        debug_assert!(m <= self.n_time_steps);
        self.t0 + self.dt() * T::of_usize(m)
    }

    /// The `j`-th space node (`j` in `0..=n_space_cells`).
    pub fn x_node(&self, j: usize) -> T {
        debug_assert!(j <= self.n_space_cells);
        self.x_min + self.dx() * T::of_usize(j)
    }

    /// All time nodes in increasing order.
    pub fn t_nodes(&self) -> Vec<T> {
        (0..self.n_time_nodes()).map(|m| self.t_node(m)).collect()
    }

    /// All space nodes in increasing order.
    pub fn x_nodes(&self) -> Vec<T> {
        (0..self.n_space_nodes()).map(|j| self.x_node(j)).collect()
    }

    /// Clamps `x` into `[x_min, x_max]`.
    pub fn clamp_x(&self, x: T) -> T {
        x.max(self.x_min).min(self.x_max)
    }

    /// Index of the spatial cell containing `x` (clamped), in
    /// `0..n_space_cells`, plus the fractional offset within the cell in
    /// `[0, 1]`.
    pub fn locate_x(&self, x: T) -> (usize, T) {
        let x = self.clamp_x(x);
        let u = (x - self.x_min) / self.dx();
        let mut cell = u.floor().to_usize().unwrap_or(0);
        if cell >= self.n_space_cells {
            cell = self.n_space_cells - 1;
        }
        let frac = u - T::of_usize(cell);
        (cell, frac.max(T::zero()).min(T::one()))
    }

    /// Index of the time cell containing `t` (clamped), in
    /// `0..n_time_steps`, plus the fractional offset within the cell.
    pub fn locate_t(&self, t: T) -> (usize, T) {
        let t = t.max(self.t0).min(self.t_final);
        let u = (t - self.t0) / self.dt();
        let mut cell = u.floor().to_usize().unwrap_or(0);
        if cell >= self.n_time_steps {
            cell = self.n_time_steps - 1;
        }
        let frac = u - T::of_usize(cell);
        (cell, frac.max(T::zero()).min(T::one()))
    }

    /// True when `x` lies strictly inside the spatial interval.
    pub fn contains_x(&self, x: T) -> bool {
        x > self.x_min && x < self.x_max
    }

    /// Whether two grids have identical time discretizations (the
    /// compatibility requirement for reconstructing along paths).
    pub fn same_time_axis(&self, other: &Self) -> bool {
        self.t0 == other.t0
            && self.t_final == other.t_final
            && self.n_time_steps == other.n_time_steps
    }
}
