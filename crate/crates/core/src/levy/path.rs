use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::measure::LevySpec;
use crate::error::{domain, Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// A path observed on a time grid. The value at a jump time is the post-jump
/// value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return domain("times and values differ in length");
        }
        check_grid(&times)?;
        Ok(PathSample { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Successive differences of the values.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return domain("time grid must be finite and strictly increasing");
    }
    Ok(())
}

/// Sum of the retained jumps over a stretch of length `dt`.
fn jump_sum(spec: &LevySpec, dt: f64, rng: &mut SimRng) -> Result<f64> {
    let mean = spec.jump_rate() * dt;
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let count: f64 = Poisson::new(mean).map_err(|e| Error::Domain(format!("jump count: {e}")))?.sample(rng);
    let mut sum = 0.0;
    for _ in 0..count as u64 {
        let u = 1.0 - rng.random::<f64>();
        sum += spec.jump_size(u);
    }
    Ok(sum)
}

/// Compound-Poisson approximation of the Lévy path on `grid ⊂ [0, horizon]`,
/// started from 0 at time 0.
pub fn sample_levy_path(spec: &LevySpec, horizon: f64, grid: &[f64], seed: u64) -> Result<PathSample> {
    spec.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    check_grid(grid)?;
    if grid.first().is_some_and(|t| *t < 0.0) || grid.last().is_some_and(|t| *t > horizon) {
        return domain("grid must lie in [0, horizon]");
    }
    let drift = spec.sampler_drift()?.value;
    let mut rng = rng_from_seed(seed);
    let mut jumps = 0.0;
    let mut prev = 0.0;
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        jumps += jump_sum(spec, t - prev, &mut rng)?;
        values.push(drift * t + jumps);
        prev = t;
    }
    Ok(PathSample { times: grid.to_vec(), values })
}

/// `count` independent increments `L_{lag}` of the sampler.
pub fn levy_increments(spec: &LevySpec, lag: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(lag > 0.0 && lag.is_finite()) {
        return domain(format!("lag must be positive, got {lag}"));
    }
    let drift = spec.sampler_drift()?.value;
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| Ok(drift * lag + jump_sum(spec, lag, &mut rng)?)).collect()
}
