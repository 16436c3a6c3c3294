//! Gaussian sandwich and tail-bound audits.
//!
//! Given covariance-integral bounds `0 < l ≤ L` for a functional `F`, the
//! true density is squeezed between
//!
//! ```text
//! lower(x) = E|F−EF|/(2L) · exp(−(x−EF)²/(2l)),
//! upper(x) = E|F−EF|/(2l) · exp(−(x−EF)²/(2L)),
//! ```
//!
//! and the tails obey `P(F ≥ x) ≤ exp(−(x−EF)²/(2L))` with the mirror
//! statement on the left. The audits compare a kernel density estimate
//! (respectively the empirical tail frequencies) against those envelopes.
//!
//! Because the envelopes constrain the *true* density while the kernel
//! estimate carries sampling noise, the sandwich audit allows a tolerance
//! band of three bootstrap standard errors around the envelopes. The band
//! is applied as an absolute offset using the largest pointwise standard
//! error over the probe grid: a pointwise band would force spurious
//! violations wherever the local sample count is zero but the true
//! density is still positive (the estimator reads exactly zero there with
//! zero bootstrap spread, yet the lower envelope does not vanish).

use std::io::Write;

use serde::Serialize;

use fbsde_core::stats::binomial_standard_error;

use crate::estimate::{kde_with_errors, BandwidthRule};
use crate::DensityError;

/// Multiples of `√L` at which the tail bound is probed.
pub const TAIL_PROBE_STEPS: usize = 8;

/// Constants entering the envelope exponents, recorded verbatim in every
/// report so a reader can re-derive `l` and `L` without the solver.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EnvelopeConstants {
    /// Elapsed time `t − t₀` the bounds refer to.
    pub t: Option<f64>,
    /// Slope bound `K` on the coupled drift (exponent rate).
    pub k_bound: Option<f64>,
    /// Smallest diffusion value over the occupied region.
    pub sigma_min: Option<f64>,
    /// Largest diffusion value over the occupied region.
    pub sigma_max: Option<f64>,
    /// Factor multiplying `t·e^{2Kt}` in `L` (defaults to `sigma_max²`).
    pub c_upper: Option<f64>,
    /// Factor multiplying `t·e^{−2Kt}` in `l` (defaults to
    /// `(sigma_min/sigma_max)²`).
    pub c_lower: Option<f64>,
    /// Largest `|∂_x v|` over the occupied region (value-process bounds).
    pub gradient_sup: Option<f64>,
    /// Smallest `|∂_x v|` over the occupied slice at the evaluation time.
    pub gradient_min_abs: Option<f64>,
    /// Largest `|∂²_x v|` over the occupied region (control bounds).
    pub hessian_sup: Option<f64>,
    /// Smallest `|∂²_x v|` over the occupied slice at the evaluation time.
    pub hessian_min_abs: Option<f64>,
}

/// One probed tail point.
#[derive(Debug, Clone, Serialize)]
pub struct TailProbe {
    /// Probe position in `√L` units above/below the mean.
    pub k: f64,
    /// Right-tail threshold `mean + k·√L`.
    pub upper_threshold: f64,
    /// Left-tail threshold `mean − k·√L`.
    pub lower_threshold: f64,
    /// Gaussian bound `exp(−k²/2)` shared by both tails.
    pub bound: f64,
    /// Empirical `P(F ≥ upper_threshold)`.
    pub upper_probability: f64,
    /// Empirical `P(F ≤ lower_threshold)`.
    pub lower_probability: f64,
    /// Binomial standard error of the right-tail frequency.
    pub upper_standard_error: f64,
    /// Binomial standard error of the left-tail frequency.
    pub lower_standard_error: f64,
    /// Right-tail frequency exceeds the bound by more than three errors.
    pub upper_violation: bool,
    /// Left-tail frequency exceeds the bound by more than three errors.
    pub lower_violation: bool,
}

/// Tail-bound audit across all probes.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    /// Upper covariance bound `L` behind the probes.
    pub covariance_upper: f64,
    /// Envelope centre.
    pub mean_f: f64,
    /// Sample count.
    pub n_samples: usize,
    /// Per-probe outcomes.
    pub probes: Vec<TailProbe>,
    /// Fraction of probed tails (two per probe point) in violation.
    pub violation_fraction: f64,
}

impl TailReport {
    /// Number of violating tails.
    pub fn n_violations(&self) -> usize {
        self.probes
            .iter()
            .map(|p| usize::from(p.upper_violation) + usize::from(p.lower_violation))
            .sum()
    }
}

/// Sandwich audit of one sample against Gaussian envelopes.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Lower covariance bound `l`.
    pub covariance_lower: f64,
    /// Upper covariance bound `L`.
    pub covariance_upper: f64,
    /// Envelope centre `EF`.
    pub mean_f: f64,
    /// Sample `E|F − EF|` about the centre (envelope amplitude).
    pub abs_deviation: f64,
    /// Probe abscissae shared by estimate and envelopes.
    pub probe_grid: Vec<f64>,
    /// Lower envelope on the probe grid.
    pub lower_env: Vec<f64>,
    /// Upper envelope on the probe grid.
    pub upper_env: Vec<f64>,
    /// Kernel density estimate on the probe grid.
    pub kde_values: Vec<f64>,
    /// Bandwidth of the kernel estimate.
    pub bandwidth: f64,
    /// Sample count.
    pub n_samples: usize,
    /// Absolute tolerance band (three bootstrap standard errors).
    pub tolerance: f64,
    /// Fraction of probes where the estimate exits the banded sandwich.
    pub sandwich_violation_fraction: f64,
    /// Tail audit at the same `L` and centre.
    pub tail: TailReport,
    /// Constants the bounds were assembled from (filled by the
    /// model/field-driven constructors; empty for direct audits).
    pub constants: EnvelopeConstants,
}

impl BoundReport {
    /// Fraction of probed tails in violation.
    pub fn tail_violation_fraction(&self) -> f64 {
        self.tail.violation_fraction
    }

    /// Writes the curves as CSV with header `x,kde,lower,upper`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,kde,lower,upper")?;
        for i in 0..self.probe_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.probe_grid[i], self.kde_values[i], self.lower_env[i], self.upper_env[i]
            )?;
        }
        Ok(())
    }
}

/// Evaluates the two Gaussian envelopes on a probe grid.
///
/// `amplitude` is `E|F − EF|`; the lower envelope divides it by `2L` and
/// decays at rate `l`, the upper divides by `2l` and decays at rate `L`.
/// When `l == L` the two expressions are identical floating-point
/// programs, so the envelopes coincide bit-for-bit.
pub fn gaussian_envelopes(
    probe_grid: &[f64],
    l: f64,
    l_upper: f64,
    mean: f64,
    amplitude: f64,
) -> (Vec<f64>, Vec<f64>) {
    let lower = probe_grid
        .iter()
        .map(|&x| {
            let d = x - mean;
            amplitude / (2.0 * l_upper) * (-d * d / (2.0 * l)).exp()
        })
        .collect();
    let upper = probe_grid
        .iter()
        .map(|&x| {
            let d = x - mean;
            amplitude / (2.0 * l) * (-d * d / (2.0 * l_upper)).exp()
        })
        .collect();
    (lower, upper)
}

fn validate_bounds(l: f64, l_upper: f64) -> Result<(), DensityError> {
    if !(l > 0.0) || !l.is_finite() || !l_upper.is_finite() {
        return Err(DensityError::Degenerate(format!(
            "covariance bounds must be positive finite, got l={l}, L={l_upper}"
        )));
    }
    if l > l_upper {
        return Err(DensityError::BadBounds {
            lower: l,
            upper: l_upper,
        });
    }
    Ok(())
}

/// Audits a sample's kernel density against the Gaussian sandwich for
/// covariance bounds `l ≤ L` centred at `mean`.
///
/// The envelope amplitude is the sample mean absolute deviation about the
/// supplied centre, so the audit is exactly translation-equivariant. The
/// violation fraction counts probes where the kernel estimate exits
/// `[lower − η, upper + η]` with `η` three bootstrap standard errors. A
/// tail audit at the same `L` is embedded in the report.
pub fn gaussian_sandwich_check(
    samples: &[f64],
    l: f64,
    l_upper: f64,
    mean: f64,
) -> Result<BoundReport, DensityError> {
    validate_bounds(l, l_upper)?;
    let diag = kde_with_errors(samples, BandwidthRule::Silverman)?;
    let amplitude = samples.iter().map(|s| (s - mean).abs()).sum::<f64>() / samples.len() as f64;
    let (lower_env, upper_env) =
        gaussian_envelopes(&diag.estimate.probe_grid, l, l_upper, mean, amplitude);
    let eta = diag.tolerance;
    let mut violations = 0usize;
    for i in 0..diag.estimate.probe_grid.len() {
        let v = diag.estimate.values[i];
        if v < lower_env[i] - eta || v > upper_env[i] + eta {
            violations += 1;
        }
    }
    let n_probes = diag.estimate.probe_grid.len();
    let tail = tail_check(samples, l_upper, mean)?;
    Ok(BoundReport {
        covariance_lower: l,
        covariance_upper: l_upper,
        mean_f: mean,
        abs_deviation: amplitude,
        probe_grid: diag.estimate.probe_grid,
        lower_env,
        upper_env,
        kde_values: diag.estimate.values,
        bandwidth: diag.estimate.bandwidth,
        n_samples: samples.len(),
        tolerance: eta,
        sandwich_violation_fraction: violations as f64 / n_probes as f64,
        tail,
        constants: EnvelopeConstants::default(),
    })
}

/// Audits the empirical tails against `P(|F − mean| ≥ k·√L) ≤ exp(−k²/2)`
/// per side, at `k = 0.5, 1.0, …, 4.0`.
///
/// A tail is flagged when its empirical frequency exceeds the bound by
/// more than three binomial standard errors.
pub fn tail_check(samples: &[f64], l_upper: f64, mean: f64) -> Result<TailReport, DensityError> {
    if !(l_upper > 0.0) || !l_upper.is_finite() {
        return Err(DensityError::Degenerate(format!(
            "tail bound needs positive finite L, got {l_upper}"
        )));
    }
    let n = samples.len();
    assert!(n > 0, "tail audit needs samples");
    let sq = l_upper.sqrt();
    let mut probes = Vec::with_capacity(TAIL_PROBE_STEPS);
    let mut violations = 0usize;
    for step in 1..=TAIL_PROBE_STEPS {
        let k = 0.5 * step as f64;
        let up = mean + k * sq;
        let dn = mean - k * sq;
        let bound = (-0.5 * k * k).exp();
        let count_up = samples.iter().filter(|&&s| s >= up).count();
        let count_dn = samples.iter().filter(|&&s| s <= dn).count();
        let p_up = count_up as f64 / n as f64;
        let p_dn = count_dn as f64 / n as f64;
        let se_up: f64 = binomial_standard_error(count_up, n);
        let se_dn: f64 = binomial_standard_error(count_dn, n);
        let v_up = p_up > bound + 3.0 * se_up;
        let v_dn = p_dn > bound + 3.0 * se_dn;
        violations += usize::from(v_up) + usize::from(v_dn);
        probes.push(TailProbe {
            k,
            upper_threshold: up,
            lower_threshold: dn,
            bound,
            upper_probability: p_up,
            lower_probability: p_dn,
            upper_standard_error: se_up,
            lower_standard_error: se_dn,
            upper_violation: v_up,
            lower_violation: v_dn,
        });
    }
    Ok(TailReport {
        covariance_upper: l_upper,
        mean_f: mean,
        n_samples: n,
        probes,
        violation_fraction: violations as f64 / (2 * TAIL_PROBE_STEPS) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_samples(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sd * z
            })
            .collect()
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let s = normal_samples(2000, 0.0, 1.0, 1);
        assert!(matches!(
            gaussian_sandwich_check(&s, 2.0, 1.0, 0.0),
            Err(DensityError::BadBounds { .. })
        ));
        assert!(matches!(
            gaussian_sandwich_check(&s, -1.0, 1.0, 0.0),
            Err(DensityError::Degenerate(_))
        ));
    }

    #[test]
    fn collapse_bounds_make_envelopes_coincide() {
        // With l == L both envelope expressions are the same floating-point
        // program, so the difference is exactly zero.
        let grid: Vec<f64> = (0..200).map(|i| -4.0 + i as f64 * 0.04).collect();
        let (lo, hi) = gaussian_envelopes(&grid, 0.7, 0.7, 0.3, 0.55);
        for (a, b) in lo.iter().zip(&hi) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn envelopes_are_ordered_when_bounds_are() {
        let grid: Vec<f64> = (0..200).map(|i| -6.0 + i as f64 * 0.06).collect();
        let (lo, hi) = gaussian_envelopes(&grid, 0.4, 1.9, -0.2, 0.8);
        for (a, b) in lo.iter().zip(&hi) {
            assert!(a <= b);
        }
    }

    #[test]
    fn exact_gaussian_passes_collapsed_sandwich() {
        // For F = W_T the envelope pair at l = L = T *is* the N(0, T)
        // density (E|F| = √(2T/π) makes the amplitude (2πT)^{-1/2}), so
        // the audit measures pure estimator noise.
        let t: f64 = 1.0;
        let s = normal_samples(100_000, 0.0, t.sqrt(), 7);
        let report = gaussian_sandwich_check(&s, t, t, 0.0).unwrap();
        assert!(
            report.sandwich_violation_fraction <= 0.01,
            "violation fraction {}",
            report.sandwich_violation_fraction
        );
        assert_eq!(report.tail.n_violations(), 0);
    }

    #[test]
    fn shifted_gaussian_passes_after_mean_shift() {
        let t: f64 = 0.8;
        let x0 = 1.7;
        let s = normal_samples(100_000, x0, t.sqrt(), 11);
        let report = gaussian_sandwich_check(&s, t, t, x0).unwrap();
        assert!(
            report.sandwich_violation_fraction <= 0.01,
            "violation fraction {}",
            report.sandwich_violation_fraction
        );
    }

    #[test]
    fn too_narrow_bounds_are_flagged() {
        // Negative control: claiming l = L = T/4 for an N(0, T) sample
        // squeezes the envelopes far off the true density, so a large
        // share of the probe grid must violate.
        let t: f64 = 1.0;
        let s = normal_samples(100_000, 0.0, t.sqrt(), 13);
        let report = gaussian_sandwich_check(&s, t / 4.0, t / 4.0, 0.0).unwrap();
        assert!(
            report.sandwich_violation_fraction > 0.10,
            "violation fraction {}",
            report.sandwich_violation_fraction
        );
    }

    #[test]
    fn gaussian_tails_respect_their_chernoff_bound() {
        let t: f64 = 1.0;
        let s = normal_samples(200_000, 0.0, t.sqrt(), 17);
        let report = tail_check(&s, t, 0.0).unwrap();
        assert_eq!(report.n_violations(), 0, "{:#?}", report.probes);
        // The bound is monotone in L: doubling it keeps every tail clean.
        let report = tail_check(&s, 2.0 * t, 0.0).unwrap();
        assert_eq!(report.n_violations(), 0);
    }

    #[test]
    fn underclaimed_tail_bound_is_caught() {
        let t: f64 = 1.0;
        let s = normal_samples(200_000, 0.0, t.sqrt(), 19);
        let report = tail_check(&s, t / 10.0, 0.0).unwrap();
        assert!(
            report.n_violations() > 0,
            "tail audit missed the negative control"
        );
    }

    #[test]
    fn csv_export_matches_grid_length() {
        let s = normal_samples(5000, 0.0, 1.0, 23);
        let report = gaussian_sandwich_check(&s, 1.0, 1.0, 0.0).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,kde,lower,upper\n"));
        assert_eq!(text.lines().count(), 1 + report.probe_grid.len());
    }
}
