use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use super::path::{check_grid, PathSample};
use crate::error::{domain, Result};
use crate::seed::rng_from_seed;
use crate::theta::barrier_fn;

/// Relaxation time after a breakout, in units of `a²`: `θ̄` is within `1e-12`
/// of 1 beyond it.
pub const RELAXATION: f64 = 2.0;

/// Where the breakout weights `W` come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WSource {
    /// Exact Pareto(1) above the conditioning level.
    Pareto,
    /// Uniform resampling from the entries of a pool (for instance absorbed-BBM
    /// `W` samples) that exceed the conditioning level.
    Pool(Vec<f64>),
}

/// Parameters of the mesoscopic breakout model.
#[derive(Debug, Clone, PartialEq)]
pub struct MesoParams {
    pub big_a: f64,
    pub a: f64,
    pub eps_breakout: f64,
    /// Weight of the front between breakouts, `e^A` by default.
    pub z0: f64,
    pub w_source: WSource,
}

impl MesoParams {
    /// Requires the breakout probability `p_B = π/(ε e^A)` to lie in `(0, 1)`.
    pub fn new(big_a: f64, a: f64, eps_breakout: f64) -> Result<Self> {
        let p = Self::relaxed(big_a, a, eps_breakout)?;
        let pb = p.p_breakout();
        if pb >= 1.0 {
            return domain(format!("p_B = {pb} is not a probability; increase A or eps"));
        }
        Ok(p)
    }

    /// As [`MesoParams::new`], but only asks `p_B` to be a finite positive
    /// number. The clock depends on `p_B` through the rate `π p_B Z₀` alone.
    pub fn relaxed(big_a: f64, a: f64, eps_breakout: f64) -> Result<Self> {
        if !(big_a > 0.0 && a > 0.0 && eps_breakout > 0.0) || !(big_a.is_finite() && a.is_finite()) {
            return domain(format!("need positive A, a and eps, got A = {big_a}, a = {a}, eps = {eps_breakout}"));
        }
        let p = MesoParams { big_a, a, eps_breakout, z0: big_a.exp(), w_source: WSource::Pareto };
        if !(p.p_breakout() > 0.0 && p.p_breakout().is_finite()) {
            return domain("p_B underflows or overflows");
        }
        Ok(p)
    }

    pub fn p_breakout(&self) -> f64 {
        PI / (self.eps_breakout * self.big_a.exp())
    }

    /// Mean waiting time `γ₀ = (π p_B e^A)^{-1} = ε/π²`, in units of `a³`.
    pub fn gamma0(&self) -> f64 {
        1.0 / (PI * self.p_breakout() * self.big_a.exp())
    }

    /// Breakout rate per unit of `a³`.
    pub fn rate(&self) -> f64 {
        PI * self.p_breakout() * self.z0
    }

    /// Length of the relaxation window in units of `a³`.
    pub fn window(&self) -> f64 {
        RELAXATION / self.a
    }

    /// Smallest `W` that counts as a breakout: `π W > ε e^A`.
    pub fn w_threshold(&self) -> f64 {
        self.eps_breakout * self.big_a.exp() / PI
    }
}

/// Output of [`meso_front_run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MesoRun {
    /// `X(t a³) - π² A t` on the requested grid.
    pub path: PathSample,
    /// Breakout times in units of `a³`.
    pub breakout_times: Vec<f64>,
    /// Barrier shifts `Δ` of the breakouts.
    pub shifts: Vec<f64>,
}

/// Simulates the barrier: exponential waits, a Pareto breakout weight, a
/// relaxation through `f_Δ`, then a fresh wait. `grid` is in units of `a³`.
pub fn meso_front_run(mp: &MesoParams, horizon: f64, grid: &[f64], seed: u64) -> Result<MesoRun> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    check_grid(grid)?;
    if grid.first().is_some_and(|t| *t < 0.0) || grid.last().is_some_and(|t| *t > horizon) {
        return domain("grid must lie in [0, horizon]");
    }
    let pool: Vec<f64> = match &mp.w_source {
        WSource::Pareto => Vec::new(),
        WSource::Pool(ws) => {
            let thr = mp.w_threshold();
            let above: Vec<f64> = ws.iter().copied().filter(|w| *w > thr).collect();
            if above.is_empty() {
                return domain(format!("no pooled W exceeds the breakout level {thr}"));
            }
            above
        }
    };
    let mut rng = rng_from_seed(seed);
    let clock = Exp::new(mp.rate()).map_err(|e| crate::Error::Domain(format!("breakout clock: {e}")))?;
    let scale = (-mp.big_a).exp() * PI;
    let mut breakout_times = Vec::new();
    let mut shifts = Vec::new();
    let mut t = 0.0;
    loop {
        t += clock.sample(&mut rng);
        if t > horizon {
            break;
        }
        let w = if pool.is_empty() {
            mp.w_threshold() / (1.0 - rng.random::<f64>())
        } else {
            pool[rng.random_range(0..pool.len())]
        };
        breakout_times.push(t);
        shifts.push((scale * w).ln_1p());
        t += mp.window();
    }

    let window = mp.window();
    let drift = PI * PI * mp.big_a;
    let mut values = Vec::with_capacity(grid.len());
    let mut done = 0.0;
    let mut next = 0;
    for &g in grid {
        while next < breakout_times.len() && breakout_times[next] + window <= g {
            done += shifts[next];
            next += 1;
        }
        let mut x = done;
        if next < breakout_times.len() && breakout_times[next] <= g {
            x += barrier_fn(shifts[next], (g - breakout_times[next]) * mp.a)?.0;
        }
        values.push(x - drift * g);
    }
    Ok(MesoRun { path: PathSample { times: grid.to_vec(), values }, breakout_times, shifts })
}
