use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Offspring distribution `q(k)`, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ReproductionLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    m: f64,
    m2: f64,
}

impl TryFrom<Vec<f64>> for ReproductionLaw {
    type Error = crate::Error;
    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ReproductionLaw> for Vec<f64> {
    fn from(law: ReproductionLaw) -> Self {
        law.probs
    }
}

impl ReproductionLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return domain("offspring probabilities must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("offspring probabilities sum to {total}, not 1"));
        }
        let m: f64 = probs.iter().enumerate().map(|(k, q)| (k as f64 - 1.0) * q).sum();
        let m2: f64 = probs.iter().enumerate().map(|(k, q)| (k as f64) * (k as f64 - 1.0) * q).sum();
        if !(m > 0.0) {
            return domain(format!("offspring law must be supercritical, got m = {m}"));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative, m, m2 })
    }

    /// Dyadic branching: every split produces exactly two children.
    pub fn binary() -> Self {
        Self::new(vec![0.0, 0.0, 1.0]).expect("binary law is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `m = E[L - 1]`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// `m₂ = E[L(L - 1)]`.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Branching rate `β₀ = 1/(2m)` that makes drift `-1` critical.
    pub fn beta0(&self) -> f64 {
        1.0 / (2.0 * self.m)
    }

    /// Critical drift `c₀ = sqrt(2m)` at unit branching rate.
    pub fn c0(&self) -> f64 {
        (2.0 * self.m).sqrt()
    }

    /// Generating function `f(s) = Σ q(k) s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, q| acc * s + q)
    }

    pub fn pgf_derivative(&self, s: f64) -> f64 {
        self.probs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, q)| acc * s + k as f64 * q)
    }

    /// `(1-u) - f(1-u)`, accurate in relative terms for small `u`.
    pub fn one_minus_defect(&self, u: f64) -> f64 {
        let l = (-u).ln_1p();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, q)| {
                if *q == 0.0 {
                    0.0
                } else {
                    // (1-u) - (1-u)^k = -(1-u) expm1((k-1) log(1-u))
                    -q * (1.0 - u) * ((k as f64 - 1.0) * l).exp_m1()
                }
            })
            .sum()
    }

    /// Extinction probability: the smallest fixed point of `f` in `[0, 1]`.
    pub fn extinction_probability(&self) -> f64 {
        if self.probs[0] == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for _ in 0..100_000 {
            let next = self.pgf(s);
            if (next - s).abs() < 1e-16 {
                return next;
            }
            s = next;
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.iter().position(|c| u < *c).unwrap_or(self.probs.len() - 1)
    }
}
