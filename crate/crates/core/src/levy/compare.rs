use serde::Serialize;

use crate::error::{domain, Result};
use crate::stats::{ks_critical_two_sample, ks_two_sample, normal_upper_quantile};

/// Two-sample comparison of one-dimensional marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionComparison {
    pub ks: f64,
    pub ks_critical: f64,
    /// `max_λ |φ̂_a(λ) - φ̂_b(λ)|`.
    pub cf_distance: f64,
    /// Largest studentized real or imaginary CF difference.
    pub cf_statistic: f64,
    /// Bonferroni critical value for `cf_statistic`.
    pub cf_critical: f64,
    pub alpha: f64,
    pub lambdas: Vec<f64>,
}

impl DistributionComparison {
    pub fn ks_passes(&self) -> bool {
        self.ks < self.ks_critical
    }

    pub fn cf_passes(&self) -> bool {
        self.cf_statistic < self.cf_critical
    }
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let m = xs.clone().sum::<f64>() / n;
    let v = xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

/// KS and characteristic-function comparison of two samples at level `alpha`.
pub fn distribution_compare(a: &[f64], b: &[f64], lambdas: &[f64], alpha: f64) -> Result<DistributionComparison> {
    if a.is_empty() || b.is_empty() {
        return domain("distribution comparison needs two nonempty samples");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("level must lie in (0, 1), got {alpha}"));
    }
    let ks = ks_two_sample(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let z = normal_upper_quantile(alpha / (4.0 * lambdas.len().max(1) as f64));
    let mut cf_distance: f64 = 0.0;
    let mut cf_statistic: f64 = 0.0;
    for &l in lambdas {
        let parts = [
            (mean_var(a.iter().map(|x| (l * x).cos()), na), mean_var(b.iter().map(|x| (l * x).cos()), nb)),
            (mean_var(a.iter().map(|x| (l * x).sin()), na), mean_var(b.iter().map(|x| (l * x).sin()), nb)),
        ];
        let dre = parts[0].0 .0 - parts[0].1 .0;
        let dim = parts[1].0 .0 - parts[1].1 .0;
        cf_distance = cf_distance.max(dre.hypot(dim));
        for ((ma, va), (mb, vb)) in parts {
            let se = (va / na + vb / nb).sqrt();
            let d = (ma - mb).abs();
            if d > 0.0 {
                cf_statistic = cf_statistic.max(if se > 0.0 { d / se } else { f64::INFINITY });
            }
        }
    }
    Ok(DistributionComparison {
        ks,
        ks_critical: ks_critical_two_sample(a.len(), b.len(), alpha),
        cf_distance,
        cf_statistic,
        cf_critical: z,
        alpha,
        lambdas: lambdas.to_vec(),
    })
}

/// Subtracts the sample mean.
pub fn centered(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| x - m).collect()
}
