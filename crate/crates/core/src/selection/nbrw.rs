//! Lattice N-BRW and its deterministic cutoff approximation.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::front::{a_n, median_alpha, Atoms, FrontState, FrontTrace, SiteCounts};
use crate::error::{domain, Error, Result};
use crate::seed::rng_from_seed;

/// One step of the walk: each particle splits in two with probability
/// `branch_prob`, then every particle independently moves one site to the
/// right with probability `jump_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrwParams {
    pub branch_prob: f64,
    pub jump_prob: f64,
}

impl BrwParams {
    pub fn new(branch_prob: f64, jump_prob: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(branch_prob) && ok(jump_prob)) {
            return domain(format!("probabilities must lie in [0, 1], got {branch_prob}, {jump_prob}"));
        }
        Ok(Self { branch_prob, jump_prob })
    }

    /// Branching 0.05, jumping 0.25.
    pub fn reference() -> Self {
        Self { branch_prob: 0.05, jump_prob: 0.25 }
    }

    /// `log E[Σ e^{θ X}]` over the particles after one step from the origin.
    pub fn log_laplace(&self, theta: f64) -> f64 {
        ((1.0 + self.branch_prob) * (1.0 - self.jump_prob + self.jump_prob * theta.exp())).ln()
    }

    /// Speed without selection: `min_{θ>0} log E[Σ e^{θX}] / θ`.
    pub fn free_speed(&self) -> Result<f64> {
        if self.branch_prob == 0.0 {
            return domain("the free speed needs branch_prob > 0");
        }
        if self.jump_prob == 0.0 {
            return Ok(0.0);
        }
        let f = |s: f64| {
            let theta = s.exp();
            self.log_laplace(theta) / theta
        };
        // Golden-section search on log θ; f is unimodal there.
        let (mut a, mut b) = (-20.0f64, 6.0f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-12 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        Ok(f(0.5 * (a + b)))
    }
}

/// How binomial counts are drawn in site mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountSampler {
    /// Exact binomials up to `threshold` trials, a rounded Gaussian beyond.
    Hybrid { threshold: f64 },
    /// One uniform per trial, consumed in the same order as exact mode.
    Bernoulli,
}

impl Default for CountSampler {
    fn default() -> Self {
        CountSampler::Hybrid { threshold: 1e6 }
    }
}

impl CountSampler {
    /// A `Binomial(n, p)` draw; sets `approximate` when the Gaussian branch
    /// is used.
    pub fn binomial<R: Rng + ?Sized>(&self, n: f64, p: f64, rng: &mut R, approximate: &mut bool) -> f64 {
        if n <= 0.0 || p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return n;
        }
        match *self {
            CountSampler::Bernoulli => (0..n as u64).filter(|_| rng.random::<f64>() < p).count() as f64,
            CountSampler::Hybrid { threshold } if n <= threshold => {
                Binomial::new(n as u64, p).expect("valid binomial parameters").sample(rng) as f64
            }
            CountSampler::Hybrid { .. } => {
                *approximate = true;
                let z: f64 = StandardNormal.sample(rng);
                (n * p + (n * p * (1.0 - p)).sqrt() * z).round().clamp(0.0, n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrwMode {
    /// Explicit particle positions.
    Exact,
    /// Counts per site.
    Sites(CountSampler),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbrwConfig {
    pub params: BrwParams,
    pub n: f64,
    pub steps: u64,
    pub alpha: f64,
    pub mode: BrwMode,
    /// Record `med_α` every this many steps.
    pub sample_every: u64,
    /// Largest allowed support width; defaults to `max(4 a_N, 64)`.
    pub window: Option<usize>,
}

impl NbrwConfig {
    pub fn new(n: f64, steps: u64) -> Self {
        Self {
            params: BrwParams::reference(),
            n,
            steps,
            alpha: 0.5,
            mode: BrwMode::Sites(CountSampler::default()),
            sample_every: 1,
            window: None,
        }
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or_else(|| {
            let a = a_n(self.n).unwrap_or(0.0);
            ((4.0 * a).ceil() as usize).max(64)
        })
    }
}

/// N-BRW state stepped one generation at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Nbrw {
    params: BrwParams,
    n: f64,
    mode: BrwMode,
    window: usize,
    step: u64,
    /// Site mode: counts. Exact mode: counts are rebuilt from `positions`.
    sites: SiteCounts,
    positions: Vec<i64>,
}

impl Nbrw {
    /// `N` particles at the origin.
    pub fn new(params: BrwParams, n: f64, mode: BrwMode, window: usize) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) || n.fract() != 0.0 {
            return domain(format!("N must be a positive integer, got {n}"));
        }
        if mode == BrwMode::Exact && n > 1e7 {
            return domain(format!("exact mode is limited to N <= 1e7, got {n}"));
        }
        let positions = if mode == BrwMode::Exact { vec![0; n as usize] } else { Vec::new() };
        Ok(Self {
            params,
            n,
            mode,
            window,
            step: 0,
            sites: SiteCounts { offset: 0, counts: vec![n], approximate: false },
            positions,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn state(&self) -> FrontState {
        let time = self.step as f64;
        match self.mode {
            BrwMode::Exact => FrontState::from_positions(time, self.positions.iter().map(|&x| x as f64).collect()),
            BrwMode::Sites(_) => FrontState { time, atoms: Atoms::Sites(self.sites.clone()) },
        }
    }

    /// Site histogram, also available in exact mode.
    pub fn histogram(&self) -> SiteCounts {
        match self.mode {
            BrwMode::Sites(_) => self.sites.clone(),
            BrwMode::Exact => {
                let lo = self.positions[0];
                let hi = *self.positions.last().expect("nonempty");
                let mut counts = vec![0.0; (hi - lo + 1) as usize];
                for x in &self.positions {
                    counts[(x - lo) as usize] += 1.0;
                }
                SiteCounts { offset: lo, counts, approximate: false }
            }
        }
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        match self.mode {
            BrwMode::Sites(sampler) => self.advance_sites(sampler, rng),
            BrwMode::Exact => self.advance_exact(rng),
        }?;
        self.step += 1;
        Ok(())
    }

    fn advance_sites<R: Rng + ?Sized>(&mut self, sampler: CountSampler, rng: &mut R) -> Result<()> {
        let BrwParams { branch_prob: b, jump_prob: p } = self.params;
        let old = &self.sites.counts;
        let mut next = vec![0.0; old.len() + 1];
        let mut approx = self.sites.approximate;
        for (i, &n) in old.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            let branched = sampler.binomial(n, b, rng, &mut approx);
            let single = n - branched;
            let doubled = 2.0 * branched;
            let j1 = sampler.binomial(single, p, rng, &mut approx);
            let j2 = sampler.binomial(doubled, p, rng, &mut approx);
            next[i] += (single - j1) + (doubled - j2);
            next[i + 1] += j1 + j2;
        }
        truncate_left(&mut next, self.n);
        self.sites.counts = next;
        self.sites.approximate = approx;
        self.sites.trim();
        if self.sites.width() > self.window {
            return Err(Error::WindowOverflow(format!(
                "support spans {} sites at step {}, window is {}",
                self.sites.width(),
                self.step + 1,
                self.window
            )));
        }
        Ok(())
    }

    fn advance_exact<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let BrwParams { branch_prob: b, jump_prob: p } = self.params;
        let mut next = Vec::with_capacity(self.positions.len() * 2);
        // Particles at one site are exchangeable, so drawing all branch
        // decisions of a site before its jump decisions is the same process.
        let mut i = 0;
        while i < self.positions.len() {
            let site = self.positions[i];
            let len = self.positions[i..].iter().take_while(|x| **x == site).count();
            let branching: Vec<bool> = (0..len).map(|_| rng.random::<f64>() < b).collect();
            for _ in branching.iter().filter(|x| !**x) {
                next.push(site + i64::from(rng.random::<f64>() < p));
            }
            for _ in branching.iter().filter(|x| **x) {
                next.push(site + i64::from(rng.random::<f64>() < p));
                next.push(site + i64::from(rng.random::<f64>() < p));
            }
            i += len;
        }
        next.sort_unstable();
        let excess = next.len().saturating_sub(self.n as usize);
        next.drain(..excess);
        self.positions = next;
        let width = (self.positions.last().expect("nonempty") - self.positions[0] + 1) as usize;
        if width > self.window {
            return Err(Error::WindowOverflow(format!("support spans {width} sites, window is {}", self.window)));
        }
        Ok(())
    }
}

/// Removes mass from the left until at most `n` remains, splitting the
/// boundary site.
fn truncate_left(counts: &mut [f64], n: f64) {
    let total: f64 = counts.iter().sum();
    if total <= n {
        return;
    }
    let mut kept = 0.0;
    for i in (0..counts.len()).rev() {
        if kept + counts[i] >= n {
            counts[i] = n - kept;
            counts[..i].iter_mut().for_each(|c| *c = 0.0);
            return;
        }
        kept += counts[i];
    }
}

/// Runs an N-BRW from `N` particles at the origin and records `med_α`.
pub fn nbrw_run(config: &NbrwConfig, seed: u64) -> Result<FrontTrace> {
    if config.sample_every == 0 {
        return domain("sample_every must be positive");
    }
    let mut rng = rng_from_seed(seed);
    let mut sim = Nbrw::new(config.params, config.n, config.mode, config.window())?;
    let mut trace = FrontTrace::new(0.0);
    let record = |sim: &Nbrw, trace: &mut FrontTrace| -> Result<()> {
        let state = sim.state();
        trace.push(state.time, median_alpha(&state, config.alpha, config.n)?, state.total());
        trace.approximate |= state.is_approximate();
        Ok(())
    };
    record(&sim, &mut trace)?;
    for s in 1..=config.steps {
        sim.advance(&mut rng)?;
        if s % config.sample_every == 0 {
            record(&sim, &mut trace)?;
        }
    }
    trace.check()?;
    Ok(trace)
}

/// Options for [`cutoff_front_speed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffOptions {
    /// Burn-in length in units of `log² N` steps.
    pub burn_in: f64,
    /// Measurement length in units of `log² N` steps (at least 20000 steps).
    pub measure: f64,
    /// Largest allowed gap between the speeds over the two measurement halves.
    pub tol: f64,
}

impl Default for CutoffOptions {
    fn default() -> Self {
        Self { burn_in: 4.0, measure: 4.0, tol: 1e-4 }
    }
}

/// Deterministic front `u_i ← (1+b)((1-p) u_i + p u_{i-1})` with every
/// `u_i < 1/N` set to zero and the total kept at 1 by removing mass from the
/// left. Returns the speed of the point with mass ½ to its right.
pub fn cutoff_front_speed(params: BrwParams, n: f64, opts: CutoffOptions) -> Result<f64> {
    if !(n > 1.0 && n.is_finite()) {
        return domain(format!("cutoff needs N > 1, got {n}"));
    }
    if params.branch_prob == 0.0 {
        return domain("cutoff front needs branch_prob > 0");
    }
    let (b, p) = (params.branch_prob, params.jump_prob);
    let cutoff = 1.0 / n;
    let log2 = n.ln().powi(2);
    let burn = (opts.burn_in * log2).ceil() as u64;
    let measure = ((opts.measure * log2).ceil() as u64).max(20_000);
    let mut u = vec![1.0];
    let mut offset = 0i64;
    let mut front = Vec::with_capacity(measure as usize + 1);
    for step in 0..burn + measure + 1 {
        if step >= burn {
            front.push(half_mass_point(&u, offset));
        }
        let mut next = vec![0.0; u.len() + 1];
        for (i, v) in next.iter_mut().enumerate() {
            let here = u.get(i).copied().unwrap_or(0.0);
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let x = (1.0 + b) * ((1.0 - p) * here + p * left);
            *v = if x < cutoff { 0.0 } else { x };
        }
        truncate_left(&mut next, 1.0);
        let first = next.iter().position(|x| *x > 0.0).ok_or_else(|| Error::Solver("cutoff front died out".into()))?;
        let last = next.iter().rposition(|x| *x > 0.0).expect("nonzero entry exists");
        offset += first as i64;
        u = next[first..=last].to_vec();
    }
    let half = front.len() / 2;
    let rate = |xs: &[f64]| (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let (v1, v2) = (rate(&front[..=half]), rate(&front[half..]));
    if (v1 - v2).abs() > opts.tol {
        return Err(Error::Solver(format!("cutoff speed not converged: {v1} vs {v2}")));
    }
    Ok(rate(&front))
}

/// Point with mass ½ to its right, treating site `i` as the cell `[i, i+1)`.
fn half_mass_point(u: &[f64], offset: i64) -> f64 {
    let total: f64 = u.iter().sum();
    let target = 0.5 * total;
    let mut right = 0.0;
    for i in (0..u.len()).rev() {
        if right + u[i] >= target {
            return (offset + i as i64) as f64 + 1.0 - (target - right) / u[i];
        }
        right += u[i];
    }
    offset as f64
}
