use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::seed::rng_from_seed;

/// Largest expected number of Poisson atoms a single sample may require.
const MAX_MEAN_ATOMS: f64 = 1e7;
/// Largest cap for [`Decoration::Compensated`]; its multiplicities reach `e^{2 cap}`.
const MAX_COMPENSATED_CAP: f64 = 6.0;

/// A finite configuration of atoms inside a closed window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointConfiguration {
    atoms: Vec<f64>,
    window: (f64, f64),
}

impl PointConfiguration {
    /// Atoms are sorted; every atom must lie in the window.
    pub fn new(mut atoms: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        check_window(window)?;
        if atoms.iter().any(|x| !(*x >= window.0 && *x <= window.1)) {
            return domain("atom outside the window");
        }
        atoms.sort_by(f64::total_cmp);
        Ok(PointConfiguration { atoms, window })
    }

    pub fn empty(window: (f64, f64)) -> Result<Self> {
        Self::new(Vec::new(), window)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `T_c`: every atom moved by `c`, then restricted to the window.
    pub fn translate(&self, c: f64) -> Self {
        let (lo, hi) = self.window;
        let atoms = self.atoms.iter().map(|x| x + c).filter(|x| *x >= lo && *x <= hi).collect();
        PointConfiguration { atoms, window: self.window }
    }

    /// Number of atoms in `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.atoms.partition_point(|x| *x < a);
        let hi = self.atoms.partition_point(|x| *x <= b);
        hi.saturating_sub(lo)
    }
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
        return domain(format!("window must be a finite interval, got {window:?}"));
    }
    Ok(())
}

/// Law of the cluster attached to each Poisson atom, relative to that atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decoration {
    /// A single atom at 0, giving the plain Poisson process.
    Single,
    /// The same offsets every time.
    Fixed { offsets: Vec<f64> },
    /// An atom at 0 plus Poisson(`mean_extra`) atoms uniform on `[-spread, 0]`.
    Cluster { mean_extra: f64, spread: f64 },
    /// An atom at 0 plus `⌊e^{2Y}⌋` atoms at `-Y`, with `Y ~ Exp(1)` truncated
    /// at `cap`. `E⟨D, e^x⟩` grows like `cap`, so as `cap → ∞` the intensity
    /// stops being finite.
    Compensated { cap: f64 },
}

/// A decoration law and whether its rightmost atom is pinned to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorationSpec {
    pub decoration: Decoration,
    pub normalized: bool,
}

impl DecorationSpec {
    pub fn plain() -> Self {
        DecorationSpec { decoration: Decoration::Single, normalized: true }
    }

    pub fn fixed(offsets: Vec<f64>) -> Self {
        DecorationSpec { decoration: Decoration::Fixed { offsets }, normalized: true }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.decoration {
            Decoration::Single => Ok(()),
            Decoration::Fixed { offsets } => {
                if offsets.is_empty() || offsets.iter().any(|x| !x.is_finite()) {
                    return domain("fixed decoration needs finite offsets");
                }
                Ok(())
            }
            Decoration::Cluster { mean_extra, spread } => {
                if !(*mean_extra >= 0.0 && mean_extra.is_finite() && *spread >= 0.0 && spread.is_finite()) {
                    return domain("cluster decoration needs finite nonnegative mean and spread");
                }
                Ok(())
            }
            Decoration::Compensated { cap } => {
                if !(*cap > 0.0 && *cap <= MAX_COMPENSATED_CAP) {
                    return Err(Error::Config(format!(
                        "compensated decoration needs 0 < cap <= {MAX_COMPENSATED_CAP}, got {cap}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `E_max`: every decoration atom lies at or above `-E_max` relative to its
    /// Poisson atom.
    pub fn extent(&self) -> f64 {
        match &self.decoration {
            Decoration::Single => 0.0,
            Decoration::Fixed { offsets } => {
                let min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
                let max = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if self.normalized { max - min } else { (-min).max(0.0) }
            }
            Decoration::Cluster { spread, .. } => *spread,
            Decoration::Compensated { cap } => *cap,
        }
    }

    /// Appends one decoration shifted by `at` to `out`.
    fn draw<R: Rng + ?Sized>(&self, at: f64, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        match &self.decoration {
            Decoration::Single => out.push(at),
            Decoration::Fixed { offsets } => {
                let shift = if self.normalized { offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max) } else { 0.0 };
                out.extend(offsets.iter().map(|d| at + d - shift));
            }
            Decoration::Cluster { mean_extra, spread } => {
                out.push(at);
                if *mean_extra > 0.0 {
                    let k: f64 = Poisson::new(*mean_extra).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
                    out.extend((0..k as u64).map(|_| at - spread * rng.random::<f64>()));
                }
            }
            Decoration::Compensated { cap } => {
                out.push(at);
                // Exp(1) conditioned on [0, cap] by inversion.
                let u: f64 = rng.random();
                let y = -(u * (-cap).exp_m1()).ln_1p();
                let mult = (2.0 * y).exp().floor() as usize;
                out.extend(std::iter::repeat_n(at - y, mult));
            }
        }
        Ok(())
    }
}

/// Decorated Poisson process with intensity `e^{-x} dx`, observed in `window`.
/// Poisson atoms below `w_lo - E_max` cannot reach the window and are never
/// generated, so the restriction is exact.
pub fn sample_dppp(dec: &DecorationSpec, window: (f64, f64), seed: u64) -> Result<PointConfiguration> {
    dec.validate()?;
    check_window(window)?;
    let base = window.0 - dec.extent();
    let mean = (-base).exp();
    if !(mean <= MAX_MEAN_ATOMS) {
        return Err(Error::Config(format!("window needs about {mean:e} Poisson atoms per sample")));
    }
    let mut rng = rng_from_seed(seed);
    let count: f64 = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
    let mut all = Vec::new();
    for _ in 0..count as u64 {
        let e: f64 = Exp1.sample(&mut rng);
        dec.draw(base + e, &mut rng, &mut all)?;
    }
    all.retain(|x| *x >= window.0 && *x <= window.1);
    all.shrink_to_fit();
    PointConfiguration::new(all, window)
}

/// `T_α z1 ∪ T_β z2` restricted to the common window, for `e^α + e^β = 1`.
pub fn superpose(z1: &PointConfiguration, z2: &PointConfiguration, alpha: f64, beta: f64) -> Result<PointConfiguration> {
    if (alpha.exp() + beta.exp() - 1.0).abs() > 1e-12 {
        return domain(format!("need e^alpha + e^beta = 1, got {}", alpha.exp() + beta.exp()));
    }
    if z1.window != z2.window {
        return domain("superposed configurations must share a window");
    }
    let mut atoms = z1.translate(alpha).atoms;
    atoms.extend(z2.translate(beta).atoms);
    atoms.sort_by(f64::total_cmp);
    Ok(PointConfiguration { atoms, window: z1.window })
}

/// Position of the rightmost atom.
pub fn rightmost(config: &PointConfiguration) -> Result<f64> {
    config.atoms.last().copied().ok_or_else(|| Error::Domain("empty configuration has no rightmost atom".into()))
}
