use serde::Serialize;

use super::front::FrontTrace;
use crate::error::{domain, Error, Result};
use crate::stats::{jackknife_k_statistics, k_statistics};

/// Sample cumulants `k1..k4` of front increments over a fixed lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontCumulants {
    pub lag: f64,
    pub increments: usize,
    pub k: [f64; 4],
    /// Jackknife standard errors of `k`.
    pub se: [f64; 4],
}

/// Disjoint `lag`-increments of the recentred `med_α` series. The trace must
/// be sampled on a uniform grid whose spacing divides `lag`.
pub fn lag_increments(trace: &FrontTrace, lag: f64) -> Result<Vec<f64>> {
    trace.check()?;
    let times = &trace.sample_times;
    if times.len() < 2 || !(lag > 0.0) {
        return domain("cumulants need a sampled trace and a positive lag");
    }
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return domain("trace is not uniformly sampled");
    }
    let stride = (lag / dt).round();
    if stride < 1.0 || (stride * dt - lag).abs() > 1e-9 * lag.max(1.0) {
        return domain(format!("lag {lag} is not a multiple of the sample spacing {dt}"));
    }
    let stride = stride as usize;
    let x = trace.recentred();
    Ok(x.chunks_exact(stride).zip(x[stride..].chunks_exact(stride)).map(|(a, b)| b[0] - a[0]).collect())
}

/// Cumulants of [`lag_increments`].
pub fn front_cumulants(trace: &FrontTrace, lag: f64) -> Result<FrontCumulants> {
    let incs = lag_increments(trace, lag)?;
    cumulants_of(lag, &incs)
}

/// Cumulants of increments pooled from several traces.
pub fn cumulants_of(lag: f64, incs: &[f64]) -> Result<FrontCumulants> {
    if incs.len() < 30 {
        return Err(Error::StatisticalPower(format!("{} disjoint increments, need at least 30", incs.len())));
    }
    Ok(FrontCumulants { lag, increments: incs.len(), k: k_statistics(incs), se: jackknife_k_statistics(incs) })
}
