//! Tridiagonal linear solves via the Thomas algorithm.
//!
//! The backward time-stepping scheme for the parabolic solves reduces each
//! step to a system `A v = r` with `A` tridiagonal and strictly diagonally
//! dominant (implicit diffusion plus a nonnegative zero-order term), so the
//! elimination below is stable without pivoting.

use thiserror::Error;

use crate::scalar::Real;

/// Errors from the tridiagonal solve.
#[derive(Debug, Error)]
pub enum TridiagError {
    /// Bands have inconsistent lengths.
    #[error("tridiagonal system shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A pivot vanished during elimination (matrix not diagonally dominant).
    #[error("tridiagonal pivot too small at row {row}: |pivot| = {magnitude}")]
    SingularPivot { row: usize, magnitude: f64 },
}

/// In-place workspace for repeated same-size Thomas solves.
///
/// `lower` has length `n - 1` (sub-diagonal, rows `1..n`), `diag` length `n`,
/// `upper` length `n - 1` (super-diagonal, rows `0..n-1`).
#[derive(Debug, Clone)]
pub struct TridiagWorkspace<T> {
    scratch_c: Vec<T>,
    scratch_d: Vec<T>,
}

impl<T: Real> TridiagWorkspace<T> {
    /// Allocates scratch space for systems of size `n`.
    pub fn new(n: usize) -> Self {
        Self {
            scratch_c: vec![T::zero(); n],
            scratch_d: vec![T::zero(); n],
        }
    }

    /// Solves `A x = rhs` for tridiagonal `A`, writing the solution into
    /// `out`. All of `lower`, `diag`, `upper`, `rhs` are left unchanged.
    pub fn solve(
        &mut self,
        lower: &[T],
        diag: &[T],
        upper: &[T],
        rhs: &[T],
        out: &mut [T],
    ) -> Result<(), TridiagError> {
        let n = diag.len();
        if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n || out.len() != n {
            return Err(TridiagError::ShapeMismatch(format!(
                "diag={}, lower={}, upper={}, rhs={}, out={}",
                n,
                lower.len(),
                upper.len(),
                rhs.len(),
                out.len()
            )));
        }
        if self.scratch_c.len() < n {
            self.scratch_c.resize(n, T::zero());
            self.scratch_d.resize(n, T::zero());
        }
        let c = &mut self.scratch_c;
        let d = &mut self.scratch_d;

        let tiny = T::of(1e-300);
        if diag[0].abs() < tiny {
            return Err(TridiagError::SingularPivot {
                row: 0,
                magnitude: diag[0].abs().as_f64(),
            });
        }
        c[0] = upper[0] / diag[0];
        d[0] = rhs[0] / diag[0];
        for i in 1..n {
            let pivot = diag[i] - lower[i - 1] * c[i - 1];
            if pivot.abs() < tiny {
                return Err(TridiagError::SingularPivot {
                    row: i,
                    magnitude: pivot.abs().as_f64(),
                });
            }
            if i + 1 < n {
                c[i] = upper[i] / pivot;
            }
            d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
        }
        out[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            out[i] = d[i] - c[i] * out[i + 1];
        }
        Ok(())
    }
}

/// One-shot convenience wrapper around [`TridiagWorkspace::solve`].
pub fn solve_tridiagonal<T: Real>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<Vec<T>, TridiagError> {
    let mut out = vec![T::zero(); diag.len()];
    TridiagWorkspace::new(diag.len()).solve(lower, diag, upper, rhs, &mut out)?;
    Ok(out)
}
