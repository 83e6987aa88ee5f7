use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::stats::{ols, LineFit};

/// `a_N = log N + 3 log log N`.
pub fn a_n(n: f64) -> Result<f64> {
    if !(n > 1.0) {
        return domain(format!("a_N needs N > 1, got {n}"));
    }
    Ok(n.ln() + 3.0 * n.ln().ln())
}

/// `μ_N = sqrt(1 - π²/a_N²)`, defined once `a_N > π`.
pub fn mu_n(n: f64) -> Result<f64> {
    let a = a_n(n)?;
    if a <= PI {
        return domain(format!("μ_N needs a_N > π, got a_N = {a} at N = {n}"));
    }
    Ok((1.0 - PI * PI / (a * a)).sqrt())
}

/// Root `x ≥ 0` of `(1 + x) e^{-x} = α`, i.e. the level at which the tail mass
/// of `y e^{-y} dy` equals `α`.
pub fn x_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    // g(x) = log(1+x) - x - log α is decreasing on [0, ∞) with g(0) > 0.
    let target = alpha.ln();
    let g = |x: f64| x.ln_1p() - x - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            break;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = gx / (-x / (1.0 + x));
        let newton = x - step;
        x = if newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) < 1e-15 * hi.max(1.0) || step.abs() < 1e-16 * x.max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Site counts of a lattice front on the window `offset..offset + counts.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteCounts {
    pub offset: i64,
    pub counts: Vec<f64>,
    /// Set once any count has been drawn from the Gaussian approximation.
    pub approximate: bool,
}

impl SiteCounts {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Drops empty sites at both ends of the window.
    pub fn trim(&mut self) {
        let first = self.counts.iter().position(|c| *c > 0.0).unwrap_or(self.counts.len());
        let last = self.counts.iter().rposition(|c| *c > 0.0).map_or(first, |i| i + 1);
        self.counts.truncate(last);
        self.counts.drain(..first);
        self.offset += first as i64;
    }

    pub fn width(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Atoms {
    /// Sorted ascending.
    Positions(Vec<f64>),
    Sites(SiteCounts),
}

/// Counting measure of a particle system at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontState {
    pub time: f64,
    pub atoms: Atoms,
}

impl FrontState {
    pub fn from_positions(time: f64, mut positions: Vec<f64>) -> Self {
        positions.sort_by(f64::total_cmp);
        Self { time, atoms: Atoms::Positions(positions) }
    }

    pub fn total(&self) -> f64 {
        match &self.atoms {
            Atoms::Positions(p) => p.len() as f64,
            Atoms::Sites(s) => s.total(),
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(&self.atoms, Atoms::Sites(s) if s.approximate)
    }
}

/// Smallest integer `k` with `k ≥ αN`, guarding against `αN` landing just
/// above an integer through rounding.
fn rank(alpha: f64, n: f64) -> f64 {
    let target = alpha * n;
    (target - 1e-9 * target.max(1.0)).ceil().max(1.0)
}

/// `med_α(ν) = inf{x : ν([x, ∞)) < αN}`: the `⌈αN⌉`-th largest atom, or `-∞`
/// when the front holds fewer than `αN` particles.
pub fn median_alpha(front: &FrontState, alpha: f64, n: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(n >= 1.0) {
        return domain(format!("median_alpha needs alpha in (0, 1] and N >= 1, got {alpha}, {n}"));
    }
    if front.total() == 0.0 {
        return domain("median of an empty front");
    }
    let k = rank(alpha, n);
    match &front.atoms {
        Atoms::Positions(p) => Ok(kth_largest_sorted(p, k)),
        Atoms::Sites(s) => {
            let mut cum = 0.0;
            for (i, c) in s.counts.iter().enumerate().rev() {
                cum += c;
                if cum >= k {
                    return Ok((s.offset + i as i64) as f64);
                }
            }
            Ok(f64::NEG_INFINITY)
        }
    }
}

fn kth_largest_sorted(sorted: &[f64], k: f64) -> f64 {
    if k > sorted.len() as f64 {
        f64::NEG_INFINITY
    } else {
        sorted[sorted.len() - k as usize]
    }
}

/// [`median_alpha`] of an unsorted slice, reordering it in place.
pub(crate) fn median_alpha_unsorted(positions: &mut [f64], alpha: f64, n: f64) -> f64 {
    let k = rank(alpha, n);
    if positions.is_empty() || k > positions.len() as f64 {
        return f64::NEG_INFINITY;
    }
    let idx = positions.len() - k as usize;
    let (_, v, _) = positions.select_nth_unstable_by(idx, f64::total_cmp);
    *v
}

/// `n` independent draws from the density proportional to
/// `sin(πx/a) e^{-x}` on `(0, a)`, together with the number of proposals.
///
/// Proposals come from the exponential law truncated to `(0, a)` and are
/// accepted with probability `sin(πx/a)`.
pub fn sample_initial_counted<R: Rng + ?Sized>(n: usize, a: f64, rng: &mut R) -> Result<(Vec<f64>, u64)> {
    if !(a > 0.0 && a.is_finite()) {
        return domain(format!("initial density needs a > 0, got {a}"));
    }
    let mass = -(-a).exp_m1();
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while out.len() < n {
        proposals += 1;
        let u: f64 = rng.random();
        let x = -(-u * mass).ln_1p();
        if x > 0.0 && x < a && rng.random::<f64>() < (PI * x / a).sin() {
            out.push(x);
        }
    }
    Ok((out, proposals))
}

/// `N` particles drawn from the stationary-shape initial condition with
/// `a = a_N`, as a sorted front at time 0.
pub fn sample_initial(n: usize, a: f64, seed: u64) -> Result<FrontState> {
    if n == 0 {
        return domain("need at least one particle");
    }
    let mut rng = crate::seed::rng_from_seed(seed);
    let (xs, _) = sample_initial_counted(n, a, &mut rng)?;
    Ok(FrontState::from_positions(0.0, xs))
}

/// Front functional sampled along a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrace {
    pub sample_times: Vec<f64>,
    pub med_alpha: Vec<f64>,
    pub totals: Vec<f64>,
    /// Speed subtracted by [`FrontTrace::recentred`]: `μ_N` for N-BBM, 0 for
    /// raw traces.
    pub recenter_rate: f64,
    pub approximate: bool,
}

impl FrontTrace {
    pub(crate) fn new(recenter_rate: f64) -> Self {
        Self { sample_times: Vec::new(), med_alpha: Vec::new(), totals: Vec::new(), recenter_rate, approximate: false }
    }

    pub(crate) fn push(&mut self, t: f64, med: f64, total: f64) {
        self.sample_times.push(t);
        self.med_alpha.push(med);
        self.totals.push(total);
    }

    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    /// `med_α(t) - rate · t`.
    pub fn recentred(&self) -> Vec<f64> {
        self.sample_times.iter().zip(&self.med_alpha).map(|(t, m)| m - self.recenter_rate * t).collect()
    }

    /// Samples at times `≥ t`.
    pub fn after(&self, t: f64) -> FrontTrace {
        let start = self.sample_times.partition_point(|s| *s < t);
        FrontTrace {
            sample_times: self.sample_times[start..].to_vec(),
            med_alpha: self.med_alpha[start..].to_vec(),
            totals: self.totals[start..].to_vec(),
            recenter_rate: self.recenter_rate,
            approximate: self.approximate,
        }
    }

    /// Least-squares speed of `med_α` over the second half of the run.
    pub fn speed(&self) -> Result<LineFit> {
        let Some(&end) = self.sample_times.last() else {
            return Err(Error::StatisticalPower("empty trace".into()));
        };
        let half = self.after(0.5 * (self.sample_times[0] + end));
        ols(&half.sample_times, &half.med_alpha)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.sample_times.len();
        if self.med_alpha.len() != n || self.totals.len() != n {
            return Err(Error::Construction("trace columns differ in length".into()));
        }
        if self.sample_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Construction("trace times not strictly increasing".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_alpha_closed_forms() {
        assert_eq!(x_alpha(1.0).unwrap(), 0.0);
        assert!((x_alpha(2.0 / std::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
        assert!(x_alpha(0.0).is_err() && x_alpha(1.5).is_err());
    }

    #[test]
    fn x_alpha_residual_is_tiny() {
        for alpha in [0.999_999, 0.9, 0.5, 0.1, 1e-3, 1e-12] {
            let x = x_alpha(alpha).unwrap();
            assert!(((1.0 + x) * (-x).exp() - alpha).abs() < 1e-12, "alpha = {alpha}");
        }
    }

    #[test]
    fn median_on_degenerate_and_ranked_fronts() {
        let zeros = FrontState::from_positions(0.0, vec![0.0; 8]);
        assert_eq!(median_alpha(&zeros, 0.5, 8.0).unwrap(), 0.0);
        let ranks = FrontState::from_positions(0.0, (1..=10).map(f64::from).collect());
        assert_eq!(median_alpha(&ranks, 0.35, 10.0).unwrap(), 7.0);
        assert_eq!(median_alpha(&ranks, 0.1, 10.0).unwrap(), 10.0);
        assert_eq!(median_alpha(&ranks, 0.3, 10.0).unwrap(), 8.0);
        let empty = FrontState::from_positions(0.0, vec![]);
        assert!(median_alpha(&empty, 0.5, 1.0).is_err());
    }

    #[test]
    fn median_of_sites_matches_expanded_positions() {
        let sites = SiteCounts { offset: -3, counts: vec![2.0, 0.0, 5.0, 1.0, 3.0], approximate: false };
        let mut expanded = Vec::new();
        for (i, c) in sites.counts.iter().enumerate() {
            expanded.extend(std::iter::repeat_n((i as i64 - 3) as f64, *c as usize));
        }
        let a = FrontState { time: 0.0, atoms: Atoms::Sites(sites) };
        let b = FrontState::from_positions(0.0, expanded);
        for alpha in [0.05, 0.2, 0.5, 0.77, 1.0] {
            assert_eq!(median_alpha(&a, alpha, 11.0).unwrap(), median_alpha(&b, alpha, 11.0).unwrap());
        }
    }

    #[test]
    fn unsorted_median_agrees() {
        let mut xs = vec![3.0, -1.0, 7.5, 2.0, 2.0, 0.1];
        let sorted = FrontState::from_positions(0.0, xs.clone());
        for alpha in [0.2, 0.5, 1.0] {
            assert_eq!(median_alpha_unsorted(&mut xs, alpha, 6.0), median_alpha(&sorted, alpha, 6.0).unwrap());
        }
    }

    #[test]
    fn site_trim_keeps_offsets() {
        let mut s = SiteCounts { offset: 10, counts: vec![0.0, 0.0, 1.0, 4.0, 0.0], approximate: false };
        s.trim();
        assert_eq!(s.offset, 12);
        assert_eq!(s.counts, vec![1.0, 4.0]);
    }

    #[test]
    fn initial_sample_support_and_determinism() {
        let a = a_n(1e4).unwrap();
        let f = sample_initial(5000, a, 3).unwrap();
        let Atoms::Positions(p) = &f.atoms else { unreachable!() };
        assert!(p.iter().all(|x| *x > 0.0 && *x < a));
        assert_eq!(f, sample_initial(5000, a, 3).unwrap());
    }
}
