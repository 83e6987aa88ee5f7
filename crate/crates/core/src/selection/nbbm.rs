//! Event-driven N-BBM without time discretisation.
//!
//! Particles are only looked at when needed: when one branches, when the
//! leftmost ones must be found, and at sample times. Between looks, each
//! particle carries a stack of certified lower levels `(ℓ, T)`: the path stays
//! above `ℓ` until it first hits it at time `T`. The first-passage time to a
//! fresh level `δ` below is `δ²/Z²`, and given `T` the path in between is a
//! three-dimensional Bessel bridge, so positions can be revealed exactly.
//! Finding the leftmost particle then only requires revealing those whose
//! level lies below the best candidate so far.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp, InverseGaussian, StandardNormal};
use serde::{Deserialize, Serialize};

use super::front::{a_n, median_alpha_unsorted, mu_n, sample_initial_counted, FrontState, FrontTrace};
use crate::absorbed::ReproductionLaw;
use crate::error::{domain, Error, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Starting configuration of an N-BBM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    /// `N` draws from the density proportional to `sin(πx/a_N) e^{-x}`.
    Stationary,
    /// All `N` particles at the origin.
    Origin,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbbmConfig {
    pub law: ReproductionLaw,
    pub n: usize,
    pub horizon: f64,
    pub sample_dt: f64,
    pub alpha: f64,
    pub initial: Initial,
    /// Branching events allowed before the run is abandoned.
    pub max_events: u64,
    /// Smallest spacing of the certified lower levels.
    pub min_level_gap: f64,
}

impl NbbmConfig {
    pub fn new(n: usize, horizon: f64, sample_dt: f64) -> Self {
        Self {
            law: ReproductionLaw::binary(),
            n,
            horizon,
            sample_dt,
            alpha: 0.5,
            initial: Initial::Stationary,
            max_events: u64::MAX,
            min_level_gap: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
struct Particle {
    id: u64,
    pos: f64,
    t0: f64,
    /// Certified `(level, hitting time)` pairs; the nearest is last.
    levels: Vec<(f64, f64)>,
    slot: usize,
    /// Heap entries carrying another version are stale.
    version: u32,
}

/// Min-heap entry `(key, slab index, version)`.
type Entry = Reverse<(u64, u32, u32)>;

/// Order-preserving map of finite floats into `u64`.
fn ord_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ord_bits(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

/// N-BBM whose state can be advanced event by event.
pub struct Nbbm {
    n: usize,
    law: ReproductionLaw,
    beta0: f64,
    min_gap: f64,
    slab: Vec<Particle>,
    free: Vec<usize>,
    alive: Vec<usize>,
    by_level: BinaryHeap<Entry>,
    by_hit: BinaryHeap<Entry>,
    next_id: u64,
    time: f64,
    /// Position of the last particle removed by selection.
    edge: f64,
    events: u64,
    rng: SimRng,
}

impl Nbbm {
    pub fn new(law: ReproductionLaw, n: usize, positions: Vec<f64>, min_level_gap: f64, rng: SimRng) -> Result<Self> {
        if n == 0 || positions.is_empty() || positions.len() > n {
            return domain(format!("need 1..={n} initial particles, got {}", positions.len()));
        }
        if !(min_level_gap > 0.0) || positions.iter().any(|x| !x.is_finite()) {
            return domain("level gap must be positive and positions finite");
        }
        let edge = positions.iter().copied().fold(f64::INFINITY, f64::min);
        let beta0 = law.beta0();
        let mut sim = Self {
            n,
            law,
            beta0,
            min_gap: min_level_gap,
            slab: Vec::new(),
            free: Vec::new(),
            alive: Vec::new(),
            by_level: BinaryHeap::new(),
            by_hit: BinaryHeap::new(),
            next_id: 0,
            time: 0.0,
            edge,
            events: 0,
            rng,
        };
        for x in positions {
            sim.spawn(x);
        }
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    fn gap_for(&self, pos: f64) -> f64 {
        self.min_gap.max(0.5 * (pos - self.edge))
    }

    fn spawn(&mut self, pos: f64) -> usize {
        let gap = self.gap_for(pos);
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let p = Particle {
            id: self.next_id,
            pos,
            t0: self.time,
            levels: vec![(pos - gap, self.time + gap * gap / (z * z))],
            slot: self.alive.len(),
            version: 0,
        };
        self.next_id += 1;
        let idx = match self.free.pop() {
            Some(i) => {
                let version = self.slab[i].version;
                self.slab[i] = Particle { version, ..p };
                i
            }
            None => {
                self.slab.push(p);
                self.slab.len() - 1
            }
        };
        self.alive.push(idx);
        self.index(idx);
        idx
    }

    fn index(&mut self, idx: usize) {
        let &(level, hit) = self.slab[idx].levels.last().expect("every particle holds a level");
        let p = &mut self.slab[idx];
        p.version = p.version.wrapping_add(1);
        let (i, v) = (idx as u32, p.version);
        self.by_level.push(Reverse((ord_bits(level), i, v)));
        self.by_hit.push(Reverse((ord_bits(hit), i, v)));
        if self.by_level.len() > 8 * self.alive.len() + 1024 {
            self.compact();
        }
    }

    fn unindex(&mut self, idx: usize) {
        let p = &mut self.slab[idx];
        p.version = p.version.wrapping_add(1);
    }

    fn is_current(&self, entry: &Entry) -> bool {
        let Reverse((_, i, v)) = *entry;
        self.slab[i as usize].version == v
    }

    /// Rebuilds both heaps from the live particles, dropping stale entries.
    fn compact(&mut self) {
        let live = |heap: &mut BinaryHeap<Entry>, slab: &[Particle]| {
            let entries: Vec<Entry> = heap.drain().filter(|Reverse((_, i, v))| slab[*i as usize].version == *v).collect();
            *heap = BinaryHeap::from(entries);
        };
        live(&mut self.by_level, &self.slab);
        live(&mut self.by_hit, &self.slab);
    }

    /// Smallest live entry of a heap, discarding stale ones on the way.
    fn peek_live(&mut self, by_hit: bool) -> Option<(u64, usize)> {
        loop {
            let top = *if by_hit { self.by_hit.peek() } else { self.by_level.peek() }?;
            if self.is_current(&top) {
                let Reverse((key, i, _)) = top;
                return Some((key, i as usize));
            }
            if by_hit {
                self.by_hit.pop();
            } else {
                self.by_level.pop();
            }
        }
    }

    fn remove(&mut self, idx: usize) {
        self.unindex(idx);
        let slot = self.slab[idx].slot;
        self.alive.swap_remove(slot);
        if let Some(&moved) = self.alive.get(slot) {
            self.slab[moved].slot = slot;
        }
        self.slab[idx].levels = Vec::new();
        self.free.push(idx);
    }

    /// Moves every particle whose nearest level was hit by `t` to that level,
    /// so that all certified levels are valid at time `t`.
    fn expire(&mut self, t: f64) {
        while let Some((key, idx)) = self.peek_live(true) {
            if from_ord_bits(key) > t {
                break;
            }
            self.unindex(idx);
            self.pass_levels(idx, t);
            self.index(idx);
        }
    }

    fn pass_levels(&mut self, idx: usize, t: f64) {
        loop {
            let &(level, hit) = self.slab[idx].levels.last().expect("every particle holds a level");
            if hit > t {
                return;
            }
            let p = &mut self.slab[idx];
            p.pos = level;
            p.t0 = hit;
            p.levels.pop();
            if p.levels.is_empty() {
                let gap = self.gap_for(level);
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.slab[idx].levels.push((level - gap, hit + gap * gap / (z * z)));
            }
        }
    }

    /// Reveals the position of `idx` at time `t`; the caller re-indexes.
    fn observe(&mut self, idx: usize, t: f64) {
        self.pass_levels(idx, t);
        let &(level, hit) = self.slab[idx].levels.last().expect("every particle holds a level");
        let (pos, t0) = (self.slab[idx].pos, self.slab[idx].t0);
        let u = t - t0;
        if u <= 0.0 {
            return;
        }
        let tau = hit - t0;
        let d0 = pos - level;
        let s = (u * (tau - u) / tau).sqrt();
        let m = d0 * (1.0 - u / tau);
        let (z1, z2, z3): (f64, f64, f64) =
            (StandardNormal.sample(&mut self.rng), StandardNormal.sample(&mut self.rng), StandardNormal.sample(&mut self.rng));
        let d = ((m + s * z1).powi(2) + (s * z2).powi(2) + (s * z3).powi(2)).sqrt();
        let new_pos = level + d;
        {
            let p = &mut self.slab[idx];
            p.pos = new_pos;
            p.t0 = t;
        }
        let gap = self.gap_for(new_pos);
        if d >= 2.0 * gap {
            let hit_new = t + bessel_bridge_passage(gap, d - gap, hit - t, &mut self.rng);
            if hit_new > t && hit_new < hit {
                self.slab[idx].levels.push((new_pos - gap, hit_new));
            }
        }
    }

    fn observe_indexed(&mut self, idx: usize, t: f64) {
        self.unindex(idx);
        self.observe(idx, t);
        self.index(idx);
    }

    /// Removes the `k` leftmost particles at the current time; ties go to
    /// the earlier-created particle.
    fn kill_leftmost(&mut self, k: usize) {
        let t = self.time;
        let mut popped = Vec::new();
        // Up to k best (position, id, idx), kept sorted ascending.
        let mut best: Vec<(f64, u64, usize)> = Vec::with_capacity(k + 1);
        while let Some((key, idx)) = self.peek_live(false) {
            if best.len() == k && from_ord_bits(key) >= best[k - 1].0 {
                break;
            }
            self.unindex(idx);
            self.observe(idx, t);
            popped.push(idx);
            let cand = (self.slab[idx].pos, self.slab[idx].id, idx);
            let at = best.partition_point(|b| (b.0, b.1) < (cand.0, cand.1));
            if at < k {
                best.insert(at, cand);
                best.truncate(k);
            }
        }
        for &(pos, _, idx) in &best {
            self.edge = pos;
            self.remove(idx);
        }
        for idx in popped {
            if !best.iter().any(|b| b.2 == idx) {
                self.index(idx);
            }
        }
    }

    /// Performs the next branching event if it occurs before `until`;
    /// returns `false` (and advances the clock to `until`) otherwise.
    pub fn step(&mut self, until: f64) -> Result<bool> {
        if self.alive.is_empty() {
            return Err(Error::Domain(format!("population extinct at time {}", self.time)));
        }
        let rate = self.beta0 * self.alive.len() as f64;
        let dt: f64 = Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut self.rng);
        let t = self.time + dt;
        if t > until {
            self.time = until;
            return Ok(false);
        }
        self.time = t;
        self.expire(t);
        let idx = self.alive[self.rng.random_range(0..self.alive.len())];
        self.observe_indexed(idx, t);
        let children = self.law.sample(&mut self.rng);
        let pos = self.slab[idx].pos;
        match children {
            0 => self.remove(idx),
            c => {
                for _ in 1..c {
                    self.spawn(pos);
                }
            }
        }
        self.events += 1;
        if self.alive.len() > self.n {
            self.kill_leftmost(self.alive.len() - self.n);
        }
        Ok(true)
    }

    /// Runs until time `t` (no-op if already there).
    pub fn advance_to(&mut self, t: f64, max_events: u64) -> Result<()> {
        while self.step(t)? {
            if self.events > max_events {
                return Err(Error::CapExceeded { cap: max_events, partial: self.events });
            }
        }
        Ok(())
    }

    /// Positions of all particles at the current time, unsorted.
    pub fn positions(&mut self) -> Vec<f64> {
        let t = self.time;
        self.expire(t);
        for i in 0..self.alive.len() {
            let idx = self.alive[i];
            self.observe_indexed(idx, t);
        }
        self.alive.iter().map(|&i| self.slab[i].pos).collect()
    }

    pub fn snapshot(&mut self) -> FrontState {
        let t = self.time;
        FrontState::from_positions(t, self.positions())
    }
}

/// First time a Brownian path hits `level + gap`, given that it starts
/// `gap + rest` above `level` and first hits `level` after `span`.
///
/// With `s` the answer, `r = s/(span - s)` has density proportional to
/// `r^{-3/2}(1 + r) exp(-gap²/(2 span r) - rest² r/(2 span))`, a two-part
/// mixture of an inverse Gaussian and its size-biased version.
fn bessel_bridge_passage<R: Rng + ?Sized>(gap: f64, rest: f64, span: f64, rng: &mut R) -> f64 {
    let lambda = gap * gap / span;
    let mu = gap / rest;
    let r = if rng.random::<f64>() * (1.0 + mu) < 1.0 {
        match InverseGaussian::new(mu, lambda) {
            Ok(ig) => ig.sample(rng),
            Err(_) => return span,
        }
    } else {
        match InverseGaussian::new(1.0 / mu, lambda / (mu * mu)) {
            Ok(ig) => 1.0 / ig.sample(rng),
            Err(_) => return span,
        }
    };
    span * r / (1.0 + r)
}

/// Runs an N-BBM and records `med_α` every `sample_dt`.
///
/// The trace is recentred by `μ_N` when `a_N > π` and left raw otherwise.
pub fn nbbm_run(config: &NbbmConfig, seed: u64) -> Result<FrontTrace> {
    let NbbmConfig { law, n, horizon, sample_dt, alpha, initial, max_events, min_level_gap } = config;
    let n = *n;
    if n == 0 || !(*horizon >= 0.0) || !(*sample_dt > 0.0) {
        return domain("N-BBM needs N >= 1, horizon >= 0 and sample_dt > 0");
    }
    let mut rng = rng_from_seed(seed);
    let start = match initial {
        Initial::Stationary => sample_initial_counted(n, a_n(n as f64)?, &mut rng)?.0,
        Initial::Origin => vec![0.0; n],
        Initial::Given(xs) => xs.clone(),
    };
    let mut sim = Nbbm::new(law.clone(), n, start, *min_level_gap, rng)?;
    let mut trace = FrontTrace::new(mu_n(n as f64).unwrap_or(0.0));
    let samples = (horizon / sample_dt + 1e-9).floor() as u64;
    for i in 0..=samples {
        let t = i as f64 * sample_dt;
        sim.advance_to(t, *max_events)?;
        let mut xs = sim.positions();
        let total = xs.len() as f64;
        trace.push(t, median_alpha_unsorted(&mut xs, *alpha, n as f64), total);
    }
    trace.check()?;
    Ok(trace)
}
