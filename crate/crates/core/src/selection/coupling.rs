//! Monotone coupling of N-BBM with more and less selective variants.
//!
//! The upper system lives on a branching forest. Every particle of the lower
//! system is connected to a distinct upper particle lying to its right and
//! copies its increments and branchings, so the two stay ordered. When the
//! upper system kills a connected particle, its partner is reconnected to a
//! free upper particle further right.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::absorbed::ReproductionLaw;
use crate::error::{domain, Error, Result};
use crate::seed::{derive_seed, rng_from_seed, SimRng};

/// When an upper (less selective) system kills.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlusPolicy {
    /// Same as N-BBM.
    ExactN,
    /// Waits until more than `N + slack` particles are alive, then culls to `N`.
    Delayed { slack: usize },
    /// Each time culling is allowed, does it with probability `kill_prob`.
    Lazy { kill_prob: f64 },
}

/// Selection rules that kill only leftmost particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Keep the `N` rightmost.
    ExactN,
    /// Kill everything with at least `N` particles to its right, then with
    /// probability `extra_kill_prob` one more (never the last particle).
    Minus { extra_kill_prob: f64 },
    /// Kill only particles with at least `N` particles to their right.
    Plus(PlusPolicy),
}

impl SelectionRule {
    /// Number of leftmost particles removed from `count` alive ones.
    pub fn kills<R: Rng + ?Sized>(&self, count: usize, n: usize, rng: &mut R) -> usize {
        let excess = count.saturating_sub(n);
        match *self {
            SelectionRule::ExactN => excess,
            SelectionRule::Minus { extra_kill_prob } => {
                let extra = count - excess > 1 && rng.random::<f64>() < extra_kill_prob;
                excess + usize::from(extra)
            }
            SelectionRule::Plus(PlusPolicy::ExactN) => excess,
            SelectionRule::Plus(PlusPolicy::Delayed { slack }) => {
                if excess > slack {
                    excess
                } else {
                    0
                }
            }
            SelectionRule::Plus(PlusPolicy::Lazy { kill_prob }) => {
                if excess > 0 && rng.random::<f64>() < kill_prob {
                    excess
                } else {
                    0
                }
            }
        }
    }

    /// Whether the rule keeps at most `N` particles after every selection.
    fn caps_population(&self) -> bool {
        matches!(self, SelectionRule::ExactN | SelectionRule::Minus { .. })
    }

    /// Whether the rule kills only particles with `N` particles to their right.
    fn kills_only_excess(&self) -> bool {
        matches!(self, SelectionRule::ExactN | SelectionRule::Plus(_))
    }
}

/// `ν ⪯ μ` for counting measures given by their atoms: there is an injective
/// map sending each atom of `lower` to a larger-or-equal atom of `upper`.
/// Decided by trying matchings exhaustively.
pub fn dominated_brute_force(lower: &[f64], upper: &[f64]) -> bool {
    fn extend(i: usize, lower: &[f64], upper: &[f64], used: &mut [bool]) -> bool {
        if i == lower.len() {
            return true;
        }
        for j in 0..upper.len() {
            if !used[j] && lower[i] <= upper[j] {
                used[j] = true;
                if extend(i + 1, lower, upper, used) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    lower.len() <= upper.len() && extend(0, lower, upper, &mut vec![false; upper.len()])
}

/// `ν ⪯ μ` via tail counts: the `k`-th largest atom of `lower` never exceeds
/// the `k`-th largest of `upper`.
pub fn dominated_sorted(lower: &[f64], upper: &[f64]) -> bool {
    let mut a = lower.to_vec();
    let mut b = upper.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    a.len() <= b.len() && a.iter().zip(&b).all(|(x, y)| x <= y)
}

/// Stopping rule for a coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingHorizon {
    pub max_time: f64,
    /// Branching events of the upper system.
    pub max_events: u64,
}

/// Configurations of a coupled pair at each event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrace {
    pub times: Vec<f64>,
    /// Sorted ascending.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub rewirings: u64,
    /// The connection map kept `lower ≤ partner` at every event.
    pub dominance_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingOutcome {
    pub dominance_ok: bool,
    /// N-BBM below an `N⁺` system.
    pub plus: CoupledTrace,
    /// An `N⁻` system below N-BBM.
    pub minus: CoupledTrace,
}

#[derive(Debug, Clone)]
struct UpperParticle {
    id: u64,
    pos: f64,
}

#[derive(Debug, Clone)]
struct LowerParticle {
    id: u64,
    partner: u64,
    /// Partner position minus own position.
    offset: f64,
}

/// Couples `lower_rule` (which must keep at most `N` particles) below
/// `upper_rule` (which must only kill particles with `N` to their right).
pub fn coupled_pair(
    law: &ReproductionLaw,
    n: usize,
    lower_rule: SelectionRule,
    upper_rule: SelectionRule,
    lower_init: &[f64],
    upper_init: &[f64],
    horizon: CouplingHorizon,
    rng: &mut SimRng,
) -> Result<CoupledTrace> {
    if !lower_rule.caps_population() || !upper_rule.kills_only_excess() {
        return domain("the lower rule must cap the population and the upper rule may only kill excess particles");
    }
    if lower_init.is_empty() || lower_init.len() > n || !dominated_sorted(lower_init, upper_init) {
        return domain("initial configurations must satisfy lower ⪯ upper with at most N lower particles");
    }
    let mut next_id = 0u64;
    let mut fresh = || {
        next_id += 1;
        next_id - 1
    };
    let mut upper: Vec<UpperParticle> = upper_init.iter().map(|&pos| UpperParticle { id: fresh(), pos }).collect();
    // Connect the k-th largest lower atom to the k-th largest upper atom.
    let mut up_order: Vec<usize> = (0..upper.len()).collect();
    up_order.sort_by(|&a, &b| upper[b].pos.total_cmp(&upper[a].pos));
    let mut low_sorted = lower_init.to_vec();
    low_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut lower: Vec<LowerParticle> = low_sorted
        .iter()
        .zip(&up_order)
        .map(|(&x, &j)| LowerParticle { id: fresh(), partner: upper[j].id, offset: upper[j].pos - x })
        .collect();

    let beta0 = law.beta0();
    let mut trace =
        CoupledTrace { times: Vec::new(), lower: Vec::new(), upper: Vec::new(), rewirings: 0, dominance_ok: true };
    let record = |t: f64, upper: &[UpperParticle], lower: &[LowerParticle], trace: &mut CoupledTrace| -> Result<()> {
        let mut seen = HashSet::new();
        let mut low = Vec::with_capacity(lower.len());
        for w in lower {
            if !seen.insert(w.partner) {
                return Err(Error::Construction(format!("upper particle {} has two partners", w.partner)));
            }
            let p = upper
                .iter()
                .find(|u| u.id == w.partner)
                .ok_or_else(|| Error::Construction(format!("lower particle {} lost its partner", w.id)))?;
            if !(w.offset >= 0.0) {
                trace.dominance_ok = false;
            }
            low.push(p.pos - w.offset);
        }
        let mut up: Vec<f64> = upper.iter().map(|u| u.pos).collect();
        low.sort_by(f64::total_cmp);
        up.sort_by(f64::total_cmp);
        trace.times.push(t);
        trace.lower.push(low);
        trace.upper.push(up);
        Ok(())
    };
    record(0.0, &upper, &lower, &mut trace)?;

    let mut t = 0.0;
    for _ in 0..horizon.max_events {
        let dt: f64 =
            Exp::new(beta0 * upper.len() as f64).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut *rng);
        if t + dt > horizon.max_time {
            break;
        }
        t += dt;
        for u in &mut upper {
            let z: f64 = StandardNormal.sample(&mut *rng);
            u.pos += dt.sqrt() * z;
        }
        let which = rng.random_range(0..upper.len());
        let parent = upper.swap_remove(which);
        let k = law.sample(&mut *rng);
        let children: Vec<u64> = (0..k)
            .map(|_| {
                let id = fresh();
                upper.push(UpperParticle { id, pos: parent.pos });
                id
            })
            .collect();

        if let Some(li) = lower.iter().position(|w| w.partner == parent.id) {
            let w = lower.swap_remove(li);
            for &c in &children {
                lower.push(LowerParticle { id: fresh(), partner: c, offset: w.offset });
            }
            let kill = lower_rule.kills(lower.len(), n, &mut *rng);
            let pos_of = |w: &LowerParticle| parent_pos(&upper, w.partner) - w.offset;
            lower.sort_by(|a, b| pos_of(a).total_cmp(&pos_of(b)).then(a.id.cmp(&b.id)));
            lower.drain(..kill.min(lower.len()));
        }

        let kill = upper_rule.kills(upper.len(), n, &mut *rng);
        upper.sort_by(|a, b| a.pos.total_cmp(&b.pos).then(a.id.cmp(&b.id)));
        for _ in 0..kill {
            let dead = upper.remove(0);
            let Some(wi) = lower.iter().position(|w| w.partner == dead.id) else {
                continue;
            };
            let lower_pos = dead.pos - lower[wi].offset;
            let linked: HashSet<u64> = lower.iter().map(|w| w.partner).collect();
            // `upper` is sorted, so this is the leftmost free particle to the right.
            let (vid, vpos) = upper
                .iter()
                .find(|u| u.pos >= dead.pos && !linked.contains(&u.id))
                .map(|u| (u.id, u.pos))
                .ok_or_else(|| Error::Construction("no free particle to the right of a killed partner".into()))?;
            lower[wi].partner = vid;
            lower[wi].offset = vpos - lower_pos;
            trace.rewirings += 1;
        }
        record(t, &upper, &lower, &mut trace)?;
    }
    Ok(trace)
}

fn parent_pos(upper: &[UpperParticle], id: u64) -> f64 {
    upper.iter().find(|u| u.id == id).map_or(f64::NAN, |u| u.pos)
}

/// Runs the two couplings `N-BBM ⪯ N⁺` and `N⁻ ⪯ N-BBM` from the same
/// random initial configuration of `N` standard normal positions.
pub fn coupled_ordering_run(
    law: &ReproductionLaw,
    n: usize,
    horizon: CouplingHorizon,
    seed: u64,
    plus_policy: PlusPolicy,
    extra_kill_prob: f64,
) -> Result<CouplingOutcome> {
    if n == 0 || n > 32 {
        return domain(format!("coupled runs support 1 <= N <= 32, got {n}"));
    }
    let mut rng = rng_from_seed(seed);
    let init: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let plus = coupled_pair(
        law,
        n,
        SelectionRule::ExactN,
        SelectionRule::Plus(plus_policy),
        &init,
        &init,
        horizon,
        &mut rng_from_seed(derive_seed(seed, 1)),
    )?;
    let minus = coupled_pair(
        law,
        n,
        SelectionRule::Minus { extra_kill_prob },
        SelectionRule::ExactN,
        &init,
        &init,
        horizon,
        &mut rng_from_seed(derive_seed(seed, 2)),
    )?;
    Ok(CouplingOutcome { dominance_ok: plus.dominance_ok && minus.dominance_ok, plus, minus })
}
