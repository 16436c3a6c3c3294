//! Sample statistics shared by the diagnostics modules.
//!
//! Everything here is deliberately order-deterministic: sums accumulate in
//! index order, and no function consults thread-local or global state, so
//! identical inputs produce bit-identical outputs across runs and thread
//! counts.

use statrs::function::erf;
use thiserror::Error;

use crate::scalar::Real;

/// Errors from statistics on unusable samples.
#[derive(Debug, Error)]
pub enum StatsError {
    /// The operation needs at least the stated number of samples.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Sample mean (sequential, index-order accumulation).
pub fn mean<T: Real>(samples: &[T]) -> T {
    let mut acc = T::zero();
    for s in samples {
        acc += *s;
    }
    acc / T::of_usize(samples.len().max(1))
}

/// Unbiased sample variance.
pub fn variance<T: Real>(samples: &[T]) -> T {
    let n = samples.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(samples);
    let mut acc = T::zero();
    for s in samples {
        let d = *s - m;
        acc += d * d;
    }
    acc / T::of_usize(n - 1)
}

/// Standard error of the sample mean, `sqrt(var / n)`.
pub fn standard_error<T: Real>(samples: &[T]) -> T {
    (variance(samples) / T::of_usize(samples.len().max(1))).sqrt()
}

/// Sample mean absolute deviation about the sample mean, `E|F - E F|`.
pub fn mean_abs_deviation<T: Real>(samples: &[T]) -> T {
    let m = mean(samples);
    let mut acc = T::zero();
    for s in samples {
        acc += (*s - m).abs();
    }
    acc / T::of_usize(samples.len().max(1))
}

/// Binomial standard error `sqrt(p_hat (1 - p_hat) / n)` for an observed
/// exceedance count out of `n` trials.
pub fn binomial_standard_error<T: Real>(count: usize, n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    let p = T::of_usize(count) / T::of_usize(n);
    (p * (T::one() - p) / T::of_usize(n)).sqrt()
}

/// Percentile with linear interpolation between order statistics.
///
/// `q` is in percent (e.g. `1.0` for the 1st percentile). The input must be
/// sorted ascending.
pub fn percentile_sorted<T: Real>(sorted: &[T], q: T) -> Result<T, StatsError> {
    let n = sorted.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let rank = (q / T::of(100.0)).max(T::zero()).min(T::one()) * T::of_usize(n - 1);
    let lo = rank.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let w = rank - T::of_usize(lo);
    Ok(sorted[lo] * (T::one() - w) + sorted[hi] * w)
}

/// Sorts a copy and delegates to [`percentile_sorted`].
pub fn percentile<T: Real>(samples: &[T], q: T) -> Result<T, StatsError> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    percentile_sorted(&v, q)
}

/// Median via [`percentile`].
pub fn median<T: Real>(samples: &[T]) -> Result<T, StatsError> {
    percentile(samples, T::of(50.0))
}

/// Standard normal probability density.
pub fn normal_pdf<T: Real>(x: T, mean: T, variance: T) -> T {
    let two_pi = T::of(2.0 * std::f64::consts::PI);
    let d = x - mean;
    (-(d * d) / (T::of(2.0) * variance)).exp() / (two_pi * variance).sqrt()
}

/// Standard normal cumulative distribution, `P(N(mean, variance) <= x)`.
pub fn normal_cdf<T: Real>(x: T, mean: T, variance: T) -> T {
    let z = (x - mean).as_f64() / variance.as_f64().sqrt();
    T::of(0.5 * erf::erfc(-z / std::f64::consts::SQRT_2))
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against the CDF
/// `reference_cdf`, `D_n = sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic_one_sample<T: Real>(
    samples: &[T],
    mut reference_cdf: impl FnMut(T) -> T,
) -> Result<T, StatsError> {
    let n = samples.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let nf = T::of_usize(n);
    let mut d = T::zero();
    for (i, x) in sorted.iter().enumerate() {
        let f = reference_cdf(*x);
        let upper = T::of_usize(i + 1) / nf - f;
        let lower = f - T::of_usize(i) / nf;
        d = d.max(upper.abs()).max(lower.abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_n(x) - G_m(x)|`.
pub fn ks_statistic_two_sample<T: Real>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFewSamples {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample"));
    let (n, m) = (sa.len(), sb.len());
    let (nf, mf) = (T::of_usize(n), T::of_usize(m));
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = T::zero();
    // Walk both empirical CDFs jointly; ties advance both indices past the
    // shared value before the gap is measured, so identical samples give an
    // exactly zero statistic.
    while i < n && j < m {
        let level = sa[i].min(sb[j]);
        while i < n && sa[i] <= level {
            i += 1;
        }
        while j < m && sb[j] <= level {
            j += 1;
        }
        let diff = (T::of_usize(i) / nf - T::of_usize(j) / mf).abs();
        d = d.max(diff);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov critical value at the 1% level,
/// `1.628 sqrt((n + m) / (n m))` (asymptotic large-sample form).
pub fn ks_two_sample_critical_1pct<T: Real>(n: usize, m: usize) -> T {
    let (nf, mf) = (T::of_usize(n), T::of_usize(m));
    T::of(1.628) * ((nf + mf) / (nf * mf)).sqrt()
}

/// Interquartile range (75th minus 25th percentile).
pub fn interquartile_range<T: Real>(samples: &[T]) -> Result<T, StatsError> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    Ok(percentile_sorted(&v, T::of(75.0))? - percentile_sorted(&v, T::of(25.0))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = vec![1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-14);
        assert!((standard_error(&xs) - (5.0 / 12.0f64).sqrt()).abs() < 1e-14);
        assert_eq!(mean_abs_deviation(&xs), 1.0);
    }

    #[test]
    fn percentile_endpoints_and_interpolation() {
        let xs = vec![10.0f64, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(percentile(&xs, 0.0).unwrap(), 10.0);
        assert_eq!(percentile(&xs, 100.0).unwrap(), 50.0);
        assert_eq!(percentile(&xs, 50.0).unwrap(), 30.0);
        assert!((percentile(&xs, 12.5).unwrap() - 15.0).abs() < 1e-12);
        assert_eq!(median(&xs).unwrap(), 30.0);
    }

    #[test]
    fn normal_cdf_known_values() {
        // The underlying complementary error function carries ~1e-11
        // approximation error, far below any statistical tolerance here.
        assert!((normal_cdf(0.0f64, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0f64, 0.0, 1.0) - 0.841344746068543).abs() < 1e-9);
        assert!((normal_cdf(-1.959963984540054f64, 0.0, 1.0) - 0.025).abs() < 1e-9);
        // Scaled: P(N(1, 4) <= 3) = Phi(1).
        assert!((normal_cdf(3.0f64, 1.0, 4.0) - 0.841344746068543).abs() < 1e-9);
    }

    #[test]
    fn normal_pdf_peak() {
        let p = normal_pdf(0.0f64, 0.0, 1.0);
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_one_sample_detects_shift() {
        // Deterministic uniform-like grid pushed through the normal quantile
        // has a tiny statistic against the true CDF, a large one shifted.
        let n = 2000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                // Crude quantile by bisection on the CDF.
                let mut lo = -8.0;
                let mut hi = 8.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid, 0.0, 1.0) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let d_good = ks_statistic_one_sample(&samples, |x| normal_cdf(x, 0.0, 1.0)).unwrap();
        let d_bad = ks_statistic_one_sample(&samples, |x| normal_cdf(x, 0.5, 1.0)).unwrap();
        assert!(d_good < 0.001, "{d_good}");
        assert!(d_bad > 0.15, "{d_bad}");
    }

    #[test]
    fn ks_two_sample_zero_for_identical() {
        let a = vec![1.0f64, 2.0, 3.0, 5.0, 8.0];
        let d = ks_statistic_two_sample(&a, &a).unwrap();
        assert!(d < 1e-15);
        let b = vec![100.0f64, 101.0];
        let d = ks_statistic_two_sample(&a, &b).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn ks_critical_value_formula() {
        let c: f64 = ks_two_sample_critical_1pct(1000, 1000);
        assert!((c - 1.628 * (2.0f64 / 1000.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn binomial_se() {
        let se: f64 = binomial_standard_error(50, 1000);
        assert!((se - (0.05f64 * 0.95 / 1000.0).sqrt()).abs() < 1e-15);
        assert_eq!(binomial_standard_error::<f64>(0, 0), 0.0);
    }

    #[test]
    fn errors_on_empty() {
        assert!(matches!(
            percentile::<f64>(&[], 50.0),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(ks_statistic_two_sample::<f64>(&[], &[1.0]).is_err());
    }
}
