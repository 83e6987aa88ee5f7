//! Small statistical toolkit shared by the Monte Carlo experiments.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical standard error of the slope from the residual variance.
    pub slope_se: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::StatisticalPower(format!("line fit needs >= 2 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::StatisticalPower("line fit with degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LineFit { slope, intercept, slope_se })
}

/// Weighted least squares with weights `w` (inverse variances).
pub fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != w.len() || x.len() < 2 {
        return Err(Error::StatisticalPower("weighted fit needs >= 2 points".into()));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::StatisticalPower("weighted fit with degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, b), c)| c * (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit { slope, intercept: my - slope * mx, slope_se: sxx.recip().sqrt() })
}

/// Standard error of a statistic by the nonparametric bootstrap.
///
/// Resamples are drawn with replacement; resamples on which `stat` fails are
/// skipped, and an error is returned if fewer than half succeed.
pub fn bootstrap_se<T: Clone, R: Rng>(
    data: &[T],
    resamples: usize,
    rng: &mut R,
    mut stat: impl FnMut(&[T]) -> Result<f64>,
) -> Result<f64> {
    let n = data.len();
    let mut values = Vec::with_capacity(resamples);
    let mut buf = Vec::with_capacity(n);
    for _ in 0..resamples {
        buf.clear();
        buf.extend((0..n).map(|_| data[rng.random_range(0..n)].clone()));
        if let Ok(v) = stat(&buf) {
            values.push(v);
        }
    }
    if values.len() * 2 < resamples.max(1) {
        return Err(Error::StatisticalPower("bootstrap resamples mostly degenerate".into()));
    }
    Ok(variance(&values).sqrt())
}

/// The first four k-statistics (unbiased cumulant estimators).
pub fn k_statistics(xs: &[f64]) -> [f64; 4] {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let (m2, m3, m4) = (s2 / n, s3 / n, s4 / n);
    let k2 = n / (n - 1.0) * m2;
    let k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    [mean, k2, k3, k4]
}

/// Jackknife standard errors of the k-statistics.
pub fn jackknife_k_statistics(xs: &[f64]) -> [f64; 4] {
    let n = xs.len();
    let mut leave_out = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(n - 1);
    for i in 0..n {
        buf.clear();
        buf.extend(xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
        leave_out.push(k_statistics(&buf));
    }
    let mut se = [0.0; 4];
    for (c, s) in se.iter_mut().enumerate() {
        let mean = leave_out.iter().map(|k| k[c]).sum::<f64>() / n as f64;
        let ss: f64 = leave_out.iter().map(|k| (k[c] - mean).powi(2)).sum();
        *s = ((n as f64 - 1.0) / n as f64 * ss).sqrt();
    }
    se
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::StatisticalPower("KS test on an empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::StatisticalPower("KS test on an empty sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov critical coefficient `c(alpha)` (1.628 at 1%).
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Two-sample KS critical value at level `alpha`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Upper standard normal quantile `z` with `P(Z > z) = p`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - p)
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ols_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_statistics_of_constant_vanish() {
        let k = k_statistics(&[3.0; 20]);
        assert_eq!(k, [3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn k_statistics_small_sample() {
        // Frozen from the textbook formulas for {1, 2, 4, 7}.
        let k = k_statistics(&[1.0, 2.0, 4.0, 7.0]);
        assert!((k[0] - 3.5).abs() < 1e-12);
        assert!((k[1] - 7.0).abs() < 1e-12);
        assert!((k[2] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [0.3, 1.0, -2.0, 5.5];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ks_coefficient_at_one_percent() {
        assert!((ks_coefficient(0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn bootstrap_se_of_mean_matches_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..400).map(|i| f64::from(i % 7)).collect();
        let se = bootstrap_se(&data, 400, &mut rng, |d| Ok(d.iter().sum::<f64>() / d.len() as f64)).unwrap();
        let (_, exact) = mean_se(&data);
        assert!((se / exact - 1.0).abs() < 0.15, "{se} vs {exact}");
    }
}
