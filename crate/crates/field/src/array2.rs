//! Dense row-major 2D arrays of `f64` indexed by (time node, space node).
//!
//! The laboratory's grids are small enough (hundreds by hundreds) that a
//! flat `Vec` with explicit shape is the whole story: contiguous rows for
//! cache-friendly sweeps, bit-reproducible iteration order, and no
//! dependency weight.

/// A dense `n_rows × n_cols` array stored row-major.
///
/// Rows index time nodes and columns index space nodes throughout this
/// workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Field2 {
    /// Zero-filled array.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds the array by evaluating `f(row, col)` in row-major order.
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                data.push(f(r, c));
            }
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    /// Wraps an existing row-major buffer; panics if the length mismatches.
    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            n_rows * n_cols,
            "buffer length must equal n_rows * n_cols"
        );
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// `(n_rows, n_cols)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.data[row * self.n_cols + col] = value;
    }

    /// Immutable view of one row.
    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        let start = row * self.n_cols;
        &self.data[start..start + self.n_cols]
    }

    /// Mutable view of one row.
    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let start = row * self.n_cols;
        &mut self.data[start..start + self.n_cols]
    }

    /// Overwrites one row from a slice of matching length.
    pub fn set_row(&mut self, row: usize, values: &[f64]) {
        self.row_mut(row).copy_from_slice(values);
    }

    /// The whole buffer, row-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Maximum of `|a_ij|` over all entries (0 for an empty array).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Minimum entry (`+inf` for an empty array).
    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |acc, v| acc.min(*v))
    }

    /// Maximum entry (`-inf` for an empty array).
    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
    }
}
