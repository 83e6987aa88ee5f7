use rand::SeedableRng;
use serde::Serialize;

use super::sim::batch;
use super::{travelling_wave, Caps, Dynamics, ReproductionLaw, WaveGrid};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SimRng};
use crate::stats::{bootstrap_se, mean_se, ols, LineFit};

/// Completed and capped runs of a batch.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub completed: Vec<u64>,
    /// Partial counts of runs that hit the event cap.
    pub capped: Vec<u64>,
}

impl RunSummary {
    /// Sorts run outcomes into completed and capped; other errors propagate.
    pub fn collect(runs: Vec<Result<super::AbsorptionRun>>) -> Result<Self> {
        let mut completed = Vec::with_capacity(runs.len());
        let mut capped = Vec::new();
        for r in runs {
            match r {
                Ok(run) => completed.push(run.n_absorbed),
                Err(Error::CapExceeded { partial, .. }) => capped.push(partial),
                Err(e) => return Err(e),
            }
        }
        Ok(Self { completed, capped })
    }
}

/// Runs replicas `0..n` in parallel, keeping every outcome in replica order.
pub fn absorbed_runs(
    law: &ReproductionLaw,
    dynamics: Dynamics,
    y: f64,
    n: usize,
    seed: u64,
    caps: Caps,
) -> Vec<Result<super::AbsorptionRun>> {
    batch(law, dynamics, y, n, seed, caps)
}

/// Runs `n` replicas and sorts them into completed and capped.
pub fn absorbed_counts(
    law: &ReproductionLaw,
    dynamics: Dynamics,
    y: f64,
    n: usize,
    seed: u64,
    caps: Caps,
) -> Result<RunSummary> {
    RunSummary::collect(batch(law, dynamics, y, n, seed, caps))
}

/// Empirical survival `P(X > x)` at each threshold, over `n_total` runs.
/// Values above the largest threshold (including capped runs) count as exceedances.
fn survival(sorted: &[f64], n_total: usize, extra_above: usize, thresholds: &[f64]) -> Vec<f64> {
    thresholds
        .iter()
        .map(|&x| {
            let below = sorted.partition_point(|v| *v <= x);
            (sorted.len() - below + extra_above) as f64 / n_total as f64
        })
        .collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Slope of `log(weight(x) P(X > x))` against `log x`.
fn tail_slope(sorted: &[f64], n_total: usize, extra: usize, thresholds: &[f64], weight: &dyn Fn(f64) -> f64) -> Result<LineFit> {
    let surv = survival(sorted, n_total, extra, thresholds);
    if surv.iter().any(|p| *p <= 0.0) {
        return Err(Error::StatisticalPower("no sample mass beyond the largest threshold".into()));
    }
    let lx: Vec<f64> = thresholds.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = surv.iter().zip(thresholds).map(|(p, x)| (p * weight(*x)).ln()).collect();
    ols(&lx, &ly)
}

/// One row of a tail table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub x: f64,
    pub survival: f64,
    /// `E[X 1{X ≤ x}]`.
    pub truncated_mean: f64,
}

/// Survival table and log-log fit for `W_y`.
#[derive(Debug, Clone, Serialize)]
pub struct WTail {
    pub y: f64,
    pub runs: usize,
    pub capped: usize,
    pub table: Vec<TailPoint>,
    pub fit: LineFit,
    /// Bootstrap standard error of the slope.
    pub slope_se: f64,
    /// Log-log slope of the truncated mean, for contrast with the survival slope.
    pub truncated_mean_slope: f64,
    pub window: (f64, f64),
    pub w_values: Vec<f64>,
}

/// Options shared by the tail experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailOptions {
    pub window: (f64, f64),
    pub thresholds: usize,
    pub bootstrap: usize,
    pub caps: Caps,
}

impl TailOptions {
    pub fn w_default() -> Self {
        Self { window: (2.0, 20.0), thresholds: 12, bootstrap: 200, caps: Caps::default() }
    }

    pub fn critical_default() -> Self {
        Self { window: (1e2, 1e4), thresholds: 12, bootstrap: 200, caps: Caps::default() }
    }
}

pub fn w_tail_experiment(law: &ReproductionLaw, y: f64, n_runs: usize, seed: u64, opts: TailOptions) -> Result<WTail> {
    if n_runs == 0 {
        return Err(Error::StatisticalPower("no runs requested".into()));
    }
    let runs = absorbed_counts(law, Dynamics::critical_line(law), y, n_runs, seed, opts.caps)?;
    w_tail_from_summary(y, &runs, seed, opts)
}

/// Tail analysis of `W_y` for runs produced elsewhere; `seed` drives the bootstrap.
pub fn w_tail_from_summary(y: f64, runs: &RunSummary, seed: u64, opts: TailOptions) -> Result<WTail> {
    let n_runs = runs.completed.len() + runs.capped.len();
    if runs.completed.is_empty() {
        return Err(Error::StatisticalPower("no completed runs".into()));
    }
    let scale = y * (-y).exp();
    let mut w: Vec<f64> = runs.completed.iter().map(|n| scale * *n as f64).collect();
    let w_values = w.clone();
    w.sort_by(f64::total_cmp);
    let thresholds = log_grid(opts.window.0, opts.window.1, opts.thresholds);
    let n_total = w.len();
    let fit = tail_slope(&w, n_total, 0, &thresholds, &|_| 1.0)?;
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, u64::MAX));
    let slope_se = bootstrap_se(&w_values, opts.bootstrap, &mut rng, |sample| {
        let mut s = sample.to_vec();
        s.sort_by(f64::total_cmp);
        tail_slope(&s, s.len(), 0, &thresholds, &|_| 1.0).map(|f| f.slope)
    })?;
    let surv = survival(&w, n_total, 0, &thresholds);
    let mut table = Vec::with_capacity(thresholds.len());
    for (x, p) in thresholds.iter().zip(surv) {
        let below = w.partition_point(|v| *v <= *x);
        let tm = w[..below].iter().sum::<f64>() / n_total as f64;
        table.push(TailPoint { x: *x, survival: p, truncated_mean: tm });
    }
    let lx: Vec<f64> = thresholds.iter().map(|x| x.ln()).collect();
    let lm: Vec<f64> = table.iter().map(|p| p.truncated_mean.max(f64::MIN_POSITIVE).ln()).collect();
    let truncated_mean_slope = ols(&lx, &lm)?.slope;
    Ok(WTail {
        y,
        runs: n_runs,
        capped: runs.capped.len(),
        table,
        fit,
        slope_se,
        truncated_mean_slope,
        window: opts.window,
        w_values,
    })
}

/// Survival table and fits for the absorbed count at unit branching rate and
/// critical drift.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalTail {
    pub x: f64,
    pub c0: f64,
    pub runs: usize,
    pub capped: usize,
    pub table: Vec<TailPoint>,
    /// Raw fit of `log P(Z > n)` against `log n`.
    pub raw_fit: LineFit,
    pub raw_slope_se: f64,
    /// Fit of `log(P(Z > n) log² n)` against `log n`.
    pub corrected_fit: LineFit,
    pub corrected_slope_se: f64,
    /// `n log²n P(Z > n) / (c₀ x e^{c₀ x})` at each threshold.
    pub normalized_ratio: Vec<f64>,
    pub window: (f64, f64),
}

pub fn critical_tail_experiment(
    law: &ReproductionLaw,
    x: f64,
    n_runs: usize,
    seed: u64,
    opts: TailOptions,
) -> Result<CriticalTail> {
    if n_runs == 0 {
        return Err(Error::StatisticalPower("no runs requested".into()));
    }
    let runs = absorbed_counts(law, Dynamics::unit_rate_critical(law), x, n_runs, seed, opts.caps)?;
    critical_tail_from_summary(law, x, &runs, seed, opts)
}

/// Tail analysis of `Z_x` for runs produced elsewhere; `seed` drives the bootstrap.
pub fn critical_tail_from_summary(
    law: &ReproductionLaw,
    x: f64,
    runs: &RunSummary,
    seed: u64,
    opts: TailOptions,
) -> Result<CriticalTail> {
    let dynamics = Dynamics::unit_rate_critical(law);
    let n_runs = runs.completed.len() + runs.capped.len();
    if n_runs == 0 {
        return Err(Error::StatisticalPower("no runs".into()));
    }
    let mut z: Vec<f64> = runs.completed.iter().map(|n| *n as f64).collect();
    let raw = z.clone();
    z.sort_by(f64::total_cmp);
    // Capped runs have Z above the cap, far beyond the window: they are exceedances.
    let extra = runs.capped.len();
    let total = n_runs;
    let thresholds = log_grid(opts.window.0, opts.window.1, opts.thresholds);
    let log2 = |n: f64| n.ln().powi(2);
    let raw_fit = tail_slope(&z, total, extra, &thresholds, &|_| 1.0)?;
    let corrected_fit = tail_slope(&z, total, extra, &thresholds, &log2)?;
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, u64::MAX));
    let boot = |w: &dyn Fn(f64) -> f64, rng: &mut SimRng| {
        bootstrap_se(&raw, opts.bootstrap, rng, |sample| {
            let mut s = sample.to_vec();
            s.sort_by(f64::total_cmp);
            tail_slope(&s, total, extra, &thresholds, w).map(|f| f.slope)
        })
    };
    let raw_slope_se = boot(&|_| 1.0, &mut rng)?;
    let corrected_slope_se = boot(&log2, &mut rng)?;
    let c0 = dynamics.drift;
    let prefactor = c0 * x * (c0 * x).exp();
    let surv = survival(&z, total, extra, &thresholds);
    let normalized_ratio = thresholds.iter().zip(&surv).map(|(n, p)| n * log2(*n) * p / prefactor).collect();
    let table = thresholds
        .iter()
        .zip(&surv)
        .map(|(n, p)| {
            let below = z.partition_point(|v| *v <= *n);
            TailPoint { x: *n, survival: *p, truncated_mean: z[..below].iter().sum::<f64>() / total as f64 }
        })
        .collect();
    Ok(CriticalTail {
        x,
        c0,
        runs: n_runs,
        capped: extra,
        table,
        raw_fit,
        raw_slope_se,
        corrected_fit,
        corrected_slope_se,
        normalized_ratio,
        window: opts.window,
    })
}

/// One row of the Laplace-duality comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacePoint {
    pub x: f64,
    /// Monte Carlo `E[exp(-e^x W_y)]`.
    pub monte_carlo: f64,
    pub se: f64,
    /// Travelling wave `ψ(x)`.
    pub wave: f64,
    /// Monte Carlo `E[ψ(x - y)^{N_y}]`, equal to `ψ(x)` for every `y` by the
    /// product martingale `Π ψ(X_u(t))`.
    pub product_martingale: f64,
    pub product_martingale_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceDuality {
    pub y: f64,
    pub runs: usize,
    pub capped: usize,
    pub points: Vec<LaplacePoint>,
    pub max_discrepancy: f64,
    /// Largest `|MC - ψ| / SE` over the grid.
    pub max_z: f64,
    /// Largest `|E[ψ(x-y)^{N_y}] - ψ(x)| / SE` over the grid.
    pub product_martingale_max_z: f64,
    pub wave_residual: f64,
}

pub fn laplace_duality_check(
    law: &ReproductionLaw,
    y: f64,
    x_grid: &[f64],
    n_runs: usize,
    seed: u64,
    caps: Caps,
) -> Result<LaplaceDuality> {
    let wave = travelling_wave(law, 1.0, WaveGrid::default())?;
    let runs = absorbed_counts(law, Dynamics::critical_line(law), y, n_runs, seed, caps)?;
    if runs.completed.is_empty() {
        return Err(Error::StatisticalPower("no completed runs".into()));
    }
    let scale = y * (-y).exp();
    let mut points = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let vals: Vec<f64> = runs.completed.iter().map(|n| (-x.exp() * scale * *n as f64).exp()).collect();
        let (m, se) = mean_se(&vals);
        let log_psi = (-wave.one_minus_psi(x - y)).ln_1p();
        let prod: Vec<f64> = runs.completed.iter().map(|n| (log_psi * *n as f64).exp()).collect();
        let (pm, pm_se) = mean_se(&prod);
        points.push(LaplacePoint {
            x,
            monte_carlo: m,
            se,
            wave: wave.psi(x),
            product_martingale: pm,
            product_martingale_se: pm_se,
        });
    }
    let max_discrepancy = points.iter().map(|p| (p.monte_carlo - p.wave).abs()).fold(0.0, f64::max);
    let max_z = points
        .iter()
        .map(|p| if p.se > 0.0 { (p.monte_carlo - p.wave).abs() / p.se } else { 0.0 })
        .fold(0.0, f64::max);
    let product_martingale_max_z = points
        .iter()
        .map(|p| {
            let d = (p.product_martingale - p.wave).abs();
            if p.product_martingale_se > 0.0 {
                d / p.product_martingale_se
            } else if d < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(LaplaceDuality {
        y,
        runs: n_runs,
        capped: runs.capped.len(),
        points,
        max_discrepancy,
        max_z,
        product_martingale_max_z,
        wave_residual: wave.residual,
    })
}

/// One row of the semigroup check at a given `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupPoint {
    pub s: f64,
    /// `F̂_{x1+x2}(s)`.
    pub direct: f64,
    pub direct_se: f64,
    /// `F̂_{x1}(F̂_{x2}(s))`.
    pub composed: f64,
    pub composed_se: f64,
    pub discrepancy: f64,
}

fn pgf_hat(counts: &[u64], s: f64) -> (f64, f64, f64) {
    let vals: Vec<f64> = counts.iter().map(|n| s.powf(*n as f64)).collect();
    let (m, se) = mean_se(&vals);
    let deriv = counts.iter().map(|n| if *n == 0 { 0.0 } else { *n as f64 * s.powf(*n as f64 - 1.0) }).sum::<f64>()
        / counts.len() as f64;
    (m, se, deriv)
}

/// Checks `F_{x1+x2} = F_{x1} ∘ F_{x2}` for the generating functions of the
/// absorbed counts at depths `x1`, `x2`, `x1 + x2`, each from independent runs.
pub fn gw_semigroup_check(
    law: &ReproductionLaw,
    x1: f64,
    x2: f64,
    s_grid: &[f64],
    n_runs: usize,
    seed: u64,
    caps: Caps,
) -> Result<Vec<SemigroupPoint>> {
    let dynamics = Dynamics::critical_line(law);
    let get = |x: f64, k: u64| -> Result<Vec<u64>> {
        let r = absorbed_counts(law, dynamics, x, n_runs, derive_seed(seed, k), caps)?;
        if !r.capped.is_empty() {
            return Err(Error::StatisticalPower(format!("{} capped runs at depth {x}", r.capped.len())));
        }
        Ok(r.completed)
    };
    let n1 = get(x1, 1)?;
    let n2 = get(x2, 2)?;
    let n12 = get(x1 + x2, 3)?;
    Ok(s_grid
        .iter()
        .map(|&s| {
            let (direct, direct_se, _) = pgf_hat(&n12, s);
            let (inner, inner_se, _) = pgf_hat(&n2, s);
            let (composed, outer_se, outer_deriv) = pgf_hat(&n1, inner);
            let composed_se = (outer_se.powi(2) + (outer_deriv * inner_se).powi(2)).sqrt();
            SemigroupPoint { s, direct, direct_se, composed, composed_se, discrepancy: (direct - composed).abs() }
        })
        .collect())
}
