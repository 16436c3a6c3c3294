//! Retained path ensembles: storage, sanity gates, summaries, and a
//! binary column export.
//!
//! An ensemble holds every path of one Euler–Maruyama run together with
//! the Brownian increments that drove it, so downstream consumers
//! (backward reconstruction, Malliavin weights, local-time sums, change
//! of measure) can re-read the noise instead of re-deriving it from
//! state differences. Layout is flat and row-per-path: path `p` occupies
//! one contiguous slice of states and one of increments, which keeps
//! parallel generation free of false sharing and makes per-path
//! iteration cache-friendly.
//!
//! Paths are never truncated at the spatial boundary — coefficient
//! lookups are clamped instead — so excursions outside the grid are
//! possible and are reported in [`ExitStats`] rather than treated as
//! errors.

use std::io::{Read, Write};

use fbsde_core::Grid;
use serde::{Deserialize, Serialize};

use crate::PathError;

/// Identifier stored in ensembles produced by the forward engine:
/// explicit Euler–Maruyama with coefficients frozen at the left endpoint
/// of each step.
pub const EULER_LEFT_SCHEME: &str = "euler_maruyama_left";

/// Magic bytes opening the binary column export.
const BINARY_MAGIC: &[u8; 4] = b"FBE1";

/// How often simulated paths left the spatial grid.
///
/// Excursions are informational: the state is never clamped, only
/// coefficient lookups are, so a nonzero fraction means tabulated
/// coefficients were extrapolated by their boundary values somewhere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ExitStats {
    /// Number of paths with at least one state outside `[x_min, x_max]`.
    pub exited_paths: usize,
    /// `exited_paths / n_paths`.
    pub exit_fraction: f64,
    /// Smallest state over all paths and times.
    pub min_state: f64,
    /// Largest state over all paths and times.
    pub max_state: f64,
}

/// One Euler–Maruyama run: all paths, the noise that drove them, and
/// the provenance needed to reproduce the run bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    /// Mesh the run was generated on (time axis used for stepping,
    /// space axis used for coefficient clamping).
    pub grid: Grid,
    /// Base seed; path `p` drew from substream `first_path_index + p`.
    pub seed: u64,
    /// Global index of the first path (nonzero for batched scans).
    pub first_path_index: usize,
    /// Scheme descriptor, [`EULER_LEFT_SCHEME`] for the built-in engine.
    pub scheme: String,
    /// Number of paths retained.
    pub n_paths: usize,
    /// Boundary-excursion statistics.
    pub exit_stats: ExitStats,
    /// States, `n_paths × (n_time_steps + 1)`, row per path.
    x: Vec<f64>,
    /// Brownian increments, `n_paths × n_time_steps`, row per path.
    dw: Vec<f64>,
}

impl PathEnsemble {
    /// Assembles an ensemble from flat row-major storage, computing the
    /// exit statistics. Panics when the slice lengths disagree with the
    /// grid and path count (internal contract of the engine).
    pub fn from_raw(
        grid: Grid,
        seed: u64,
        first_path_index: usize,
        scheme: String,
        n_paths: usize,
        x: Vec<f64>,
        dw: Vec<f64>,
    ) -> Self {
        let nodes = grid.n_time_nodes();
        assert_eq!(x.len(), n_paths * nodes, "state buffer shape");
        assert_eq!(dw.len(), n_paths * (nodes - 1), "increment buffer shape");
        let mut exited = 0usize;
        let mut min_state = f64::INFINITY;
        let mut max_state = f64::NEG_INFINITY;
        for p in 0..n_paths {
            let row = &x[p * nodes..(p + 1) * nodes];
            let mut out = false;
            for &v in row {
                if v < grid.x_min || v > grid.x_max {
                    out = true;
                }
                min_state = min_state.min(v);
                max_state = max_state.max(v);
            }
            if out {
                exited += 1;
            }
        }
        let exit_stats = ExitStats {
            exited_paths: exited,
            exit_fraction: exited as f64 / n_paths as f64,
            min_state,
            max_state,
        };
        Self {
            grid,
            seed,
            first_path_index,
            scheme,
            n_paths,
            exit_stats,
            x,
            dw,
        }
    }

    /// Number of time nodes per path (`n_time_steps + 1`).
    pub fn n_nodes(&self) -> usize {
        self.grid.n_time_nodes()
    }

    /// States of path `p`, one value per time node.
    pub fn path_x(&self, p: usize) -> &[f64] {
        let nodes = self.n_nodes();
        &self.x[p * nodes..(p + 1) * nodes]
    }

    /// Brownian increments of path `p`, one value per time step.
    pub fn path_dw(&self, p: usize) -> &[f64] {
        let steps = self.n_nodes() - 1;
        &self.dw[p * steps..(p + 1) * steps]
    }

    /// All states as one flat row-major slice.
    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    /// All increments as one flat row-major slice.
    pub fn dw_flat(&self) -> &[f64] {
        &self.dw
    }

    /// Terminal state of every path, in path order.
    pub fn terminal_states(&self) -> Vec<f64> {
        let nodes = self.n_nodes();
        (0..self.n_paths).map(|p| self.x[p * nodes + nodes - 1]).collect()
    }

    /// States of every path at time node `m`, in path order.
    pub fn states_at(&self, m: usize) -> Vec<f64> {
        let nodes = self.n_nodes();
        assert!(m < nodes, "time node {m} out of range");
        (0..self.n_paths).map(|p| self.x[p * nodes + m]).collect()
    }

    /// Audits the increment columns: sample mean within five standard
    /// errors of zero and sample variance within five standard errors
    /// of `dt`. Returns the number of columns outside either gate — a
    /// healthy run keeps this near zero, but violations are reported,
    /// not fatal, because they occur by chance at a known small rate.
    pub fn flagged_increment_columns(&self) -> usize {
        let steps = self.n_nodes() - 1;
        let n = self.n_paths;
        if n < 2 {
            return 0;
        }
        let dt = self.grid.dt();
        let mean_gate = 5.0 * (dt / n as f64).sqrt();
        let var_gate = 5.0 * dt * (2.0 / (n as f64 - 1.0)).sqrt();
        let mut flagged = 0usize;
        for m in 0..steps {
            let mut sum = 0.0;
            for p in 0..n {
                sum += self.dw[p * steps + m];
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for p in 0..n {
                let d = self.dw[p * steps + m] - mean;
                ss += d * d;
            }
            let var = ss / (n as f64 - 1.0);
            if mean.abs() > mean_gate || (var - dt).abs() > var_gate {
                flagged += 1;
            }
        }
        flagged
    }

    /// Moment/exit summary for JSON reports.
    pub fn summary(&self) -> EnsembleSummary {
        let terminal = self.terminal_states();
        EnsembleSummary {
            n_paths: self.n_paths,
            n_time_steps: self.n_nodes() - 1,
            dt: self.grid.dt(),
            seed: self.seed,
            first_path_index: self.first_path_index,
            scheme: self.scheme.clone(),
            terminal_mean: fbsde_core::stats::mean(&terminal),
            terminal_variance: fbsde_core::stats::variance(&terminal),
            exit_stats: self.exit_stats,
            flagged_increment_columns: self.flagged_increment_columns(),
        }
    }

    /// Writes the ensemble in the binary column format: a fixed header
    /// (magic, shape, grid, seed, scheme), then the state matrix and the
    /// increment matrix, both column-major (time node outermost) with
    /// little-endian `f64` entries. Column-major order lets column
    /// consumers (per-time histograms, marginal laws) stream one column
    /// without striding the whole file.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<(), PathError> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n_paths as u64).to_le_bytes())?;
        out.write_all(&(self.grid.n_time_steps as u64).to_le_bytes())?;
        out.write_all(&(self.grid.n_space_cells as u64).to_le_bytes())?;
        for v in [
            self.grid.t0,
            self.grid.t_final,
            self.grid.x_min,
            self.grid.x_max,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&(self.first_path_index as u64).to_le_bytes())?;
        let scheme = self.scheme.as_bytes();
        out.write_all(&(scheme.len() as u64).to_le_bytes())?;
        out.write_all(scheme)?;
        let nodes = self.n_nodes();
        for m in 0..nodes {
            for p in 0..self.n_paths {
                out.write_all(&self.x[p * nodes + m].to_le_bytes())?;
            }
        }
        for m in 0..nodes - 1 {
            for p in 0..self.n_paths {
                out.write_all(&self.dw[p * (nodes - 1) + m].to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads an ensemble written by [`PathEnsemble::write_binary`].
    pub fn read_binary<R: Read>(input: &mut R) -> Result<Self, PathError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(PathError::Format(format!(
                "bad magic {magic:?}, expected {BINARY_MAGIC:?}"
            )));
        }
        let mut u = [0u8; 8];
        let mut read_u64 = |input: &mut R| -> Result<u64, PathError> {
            input.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let n_paths = read_u64(input)? as usize;
        let n_time_steps = read_u64(input)? as usize;
        let n_space_cells = read_u64(input)? as usize;
        let mut f = [0u8; 8];
        let mut read_f64 = |input: &mut R| -> Result<f64, PathError> {
            input.read_exact(&mut f)?;
            Ok(f64::from_le_bytes(f))
        };
        let t0 = read_f64(input)?;
        let t_final = read_f64(input)?;
        let x_min = read_f64(input)?;
        let x_max = read_f64(input)?;
        let mut u2 = [0u8; 8];
        input.read_exact(&mut u2)?;
        let seed = u64::from_le_bytes(u2);
        input.read_exact(&mut u2)?;
        let first_path_index = u64::from_le_bytes(u2) as usize;
        input.read_exact(&mut u2)?;
        let scheme_len = u64::from_le_bytes(u2) as usize;
        if scheme_len > 1 << 16 {
            return Err(PathError::Format(format!(
                "implausible scheme descriptor length {scheme_len}"
            )));
        }
        let mut scheme_bytes = vec![0u8; scheme_len];
        input.read_exact(&mut scheme_bytes)?;
        let scheme = String::from_utf8(scheme_bytes)
            .map_err(|e| PathError::Format(format!("scheme descriptor not UTF-8: {e}")))?;
        let grid = Grid::new(t0, t_final, n_time_steps, x_min, x_max, n_space_cells)
            .map_err(|e| PathError::Format(format!("stored grid invalid: {e}")))?;
        let nodes = n_time_steps + 1;
        let mut buf = [0u8; 8];
        let mut x = vec![0.0f64; n_paths * nodes];
        for m in 0..nodes {
            for p in 0..n_paths {
                input.read_exact(&mut buf)?;
                x[p * nodes + m] = f64::from_le_bytes(buf);
            }
        }
        let mut dw = vec![0.0f64; n_paths * (nodes - 1)];
        for m in 0..nodes - 1 {
            for p in 0..n_paths {
                input.read_exact(&mut buf)?;
                dw[p * (nodes - 1) + m] = f64::from_le_bytes(buf);
            }
        }
        Ok(Self::from_raw(
            grid,
            seed,
            first_path_index,
            scheme,
            n_paths,
            x,
            dw,
        ))
    }
}

/// JSON-friendly moment and provenance summary of one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub n_time_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub first_path_index: usize,
    pub scheme: String,
    pub terminal_mean: f64,
    pub terminal_variance: f64,
    pub exit_stats: ExitStats,
    /// Increment columns outside the five-standard-error sanity gate.
    pub flagged_increment_columns: usize,
}
