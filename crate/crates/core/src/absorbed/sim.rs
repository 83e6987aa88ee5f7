use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp, InverseGaussian, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ReproductionLaw;
use crate::error::{domain, Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Branching rate, drift towards the barrier, and diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub branch_rate: f64,
    pub drift: f64,
    pub sigma: f64,
}

impl Dynamics {
    /// Drift 1 towards the barrier, branching at `β₀ = 1/(2m)`; this makes
    /// `E[N_y] = e^y`.
    pub fn critical_line(law: &ReproductionLaw) -> Self {
        Self { branch_rate: law.beta0(), drift: 1.0, sigma: 1.0 }
    }

    /// Unit branching rate with the critical drift `c₀ = sqrt(2m)`, so
    /// `E[Z_x] = e^{c₀ x}`.
    pub fn unit_rate_critical(law: &ReproductionLaw) -> Self {
        Self { branch_rate: 1.0, drift: law.c0(), sigma: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.branch_rate > 0.0 && self.sigma > 0.0 && self.drift.is_finite()) {
            return domain(format!("invalid dynamics {self:?}"));
        }
        Ok(())
    }
}

/// Limits on a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Maximum number of simulated segments (one per particle life).
    pub max_events: u64,
    /// Keep every absorption time in the result.
    pub record_times: bool,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_events: 10_000_000, record_times: false }
    }
}

/// Outcome of one absorbed-BBM run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionRun {
    /// Distance from the start to the barrier.
    pub y: f64,
    pub n_absorbed: u64,
    /// `y e^{-y} n_absorbed`.
    pub w_y: f64,
    /// Sorted absorption times; empty unless [`Caps::record_times`] is set.
    pub absorption_times: Vec<f64>,
    /// Largest number of simultaneously alive particles.
    pub peak_alive: u64,
    pub event_count: u64,
}

#[derive(Debug)]
struct Pending {
    time: f64,
    seq: u64,
    /// Distance above the barrier at `time`; `None` marks an absorption.
    position: Option<f64>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // Reversed: the heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// `simulate_with` under [`Dynamics::critical_line`].
pub fn simulate_absorbed(law: &ReproductionLaw, y: f64, seed: u64, caps: Caps) -> Result<AbsorptionRun> {
    simulate_with(law, Dynamics::critical_line(law), y, &mut rng_from_seed(seed), caps)
}

/// Branching Brownian motion started at distance `y` above an absorbing
/// barrier, drifting towards it, run until extinction.
///
/// Each particle life is one exponential branching time. Whether the path hit
/// the barrier during that life is decided exactly from the Brownian-bridge
/// minimum, and the hitting time is drawn from its conditional law, so there
/// is no discretisation error.
pub fn simulate_with<R: Rng + ?Sized>(
    law: &ReproductionLaw,
    dynamics: Dynamics,
    y: f64,
    rng: &mut R,
    caps: Caps,
) -> Result<AbsorptionRun> {
    dynamics.validate()?;
    if !(y > 0.0 && y.is_finite()) {
        return domain(format!("barrier distance must be positive, got {y}"));
    }
    let life = Exp::new(dynamics.branch_rate).map_err(|e| Error::Domain(e.to_string()))?;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut events = 0u64;
    let mut absorbed = 0u64;
    let mut times = Vec::new();
    let mut peak = 1u64;

    let mut spawn = |pos: f64, t0: f64, heap: &mut BinaryHeap<Pending>, rng: &mut R| {
        let tau: f64 = life.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let end = pos - dynamics.drift * tau + dynamics.sigma * tau.sqrt() * z;
        let crossed = end <= 0.0 || {
            let p = (-2.0 * pos * end / (dynamics.sigma * dynamics.sigma * tau)).exp();
            rng.random::<f64>() < p
        };
        seq += 1;
        let pending = if crossed {
            Pending { time: t0 + bridge_hitting_time(pos, end.abs(), tau, dynamics.sigma, rng), seq, position: None }
        } else {
            Pending { time: t0 + tau, seq, position: Some(end) }
        };
        heap.push(pending);
    };

    spawn(y, 0.0, &mut heap, rng);
    events += 1;
    while let Some(ev) = heap.pop() {
        match ev.position {
            None => {
                absorbed += 1;
                if caps.record_times {
                    times.push(ev.time);
                }
            }
            Some(pos) => {
                let k = law.sample(rng);
                for _ in 0..k {
                    if events >= caps.max_events {
                        return Err(Error::CapExceeded { cap: caps.max_events, partial: absorbed });
                    }
                    spawn(pos, ev.time, &mut heap, rng);
                    events += 1;
                }
                peak = peak.max(heap.len() as u64);
            }
        }
    }
    Ok(AbsorptionRun {
        y,
        n_absorbed: absorbed,
        w_y: y * (-y).exp() * absorbed as f64,
        absorption_times: times,
        peak_alive: peak,
        event_count: events,
    })
}

/// First time a Brownian bridge (variance `sigma²` per unit time) from `a > 0`
/// to `±b` over `[0, t]` hits zero, given that it does.
///
/// With `U ~ IG(mean a t / b, shape a²)` in units of `sigma`, the hitting time
/// is `U t / (t + U)`.
fn bridge_hitting_time<R: Rng + ?Sized>(a: f64, b: f64, t: f64, sigma: f64, rng: &mut R) -> f64 {
    let (a, b) = (a / sigma, b / sigma);
    if a <= 0.0 {
        return 0.0;
    }
    if b <= f64::MIN_POSITIVE {
        return t;
    }
    match InverseGaussian::new(a * t / b, a * a) {
        Ok(ig) => {
            let u: f64 = ig.sample(rng);
            (u * t / (t + u)).min(t)
        }
        Err(_) => t,
    }
}

/// Runs `simulate_absorbed` for replicas `0..n` in parallel.
pub(crate) fn batch(
    law: &ReproductionLaw,
    dynamics: Dynamics,
    y: f64,
    n: usize,
    seed: u64,
    caps: Caps,
) -> Vec<Result<AbsorptionRun>> {
    use rayon::prelude::*;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng: SimRng = crate::seed::replica_rng(seed, i);
            simulate_with(law, dynamics, y, &mut rng, caps)
        })
        .collect()
}
