use serde::{Deserialize, Serialize};

use super::process::PointConfiguration;
use crate::error::{domain, Error, Result};
use crate::stats::{wls, LineFit};

/// Bounded, compactly supported test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `height · 1_{[lo, hi]}`.
    Step { lo: f64, hi: f64, height: f64 },
    /// Piecewise linear, zero outside `[lo, hi]`, `height` at the midpoint.
    Tent { lo: f64, hi: f64, height: f64 },
}

impl TestFunction {
    pub fn indicator(lo: f64, hi: f64) -> Self {
        TestFunction::Step { lo, hi, height: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        let h = self.height();
        if !(lo.is_finite() && hi.is_finite() && lo < hi && h >= 0.0 && h.is_finite()) {
            return domain(format!("test function needs lo < hi and a finite height >= 0, got {self:?}"));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            TestFunction::Step { lo, hi, .. } | TestFunction::Tent { lo, hi, .. } => (lo, hi),
        }
    }

    fn height(&self) -> f64 {
        match *self {
            TestFunction::Step { height, .. } | TestFunction::Tent { height, .. } => height,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Step { lo, hi, height } => {
                if x >= lo && x <= hi {
                    height
                } else {
                    0.0
                }
            }
            TestFunction::Tent { lo, hi, height } => {
                let half = 0.5 * (hi - lo);
                let d = (x - 0.5 * (lo + hi)).abs();
                if d >= half {
                    0.0
                } else {
                    height * (1.0 - d / half)
                }
            }
        }
    }

    /// The function `y ↦ f(y + x)`; its support moves by `-x`.
    pub fn shifted(&self, x: f64) -> Self {
        match *self {
            TestFunction::Step { lo, hi, height } => TestFunction::Step { lo: lo - x, hi: hi - x, height },
            TestFunction::Tent { lo, hi, height } => TestFunction::Tent { lo: lo - x, hi: hi - x, height },
        }
    }

    /// Same shape scaled by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            TestFunction::Step { lo, hi, height } => TestFunction::Step { lo, hi, height: c * height },
            TestFunction::Tent { lo, hi, height } => TestFunction::Tent { lo, hi, height: c * height },
        }
    }

    /// `⟨Z, f⟩`.
    pub fn pair(&self, config: &PointConfiguration) -> f64 {
        let (lo, hi) = self.support();
        let atoms = config.atoms();
        let start = atoms.partition_point(|x| *x < lo);
        atoms[start..].iter().take_while(|x| **x <= hi).map(|x| self.eval(*x)).sum()
    }

    fn check_inside(&self, window: (f64, f64)) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.support();
        if lo < window.0 || hi > window.1 {
            return domain(format!("support [{lo}, {hi}] leaves the window {window:?}"));
        }
        Ok(())
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

fn common_window(samples: &[PointConfiguration]) -> Result<(f64, f64)> {
    let first = samples.first().ok_or_else(|| Error::StatisticalPower("no samples".into()))?.window();
    if samples.iter().any(|s| s.window() != first) {
        return domain("samples have different windows");
    }
    Ok(first)
}

/// Per-sample values `exp(-⟨Z, f⟩)`.
fn laplace_terms(samples: &[PointConfiguration], f: &TestFunction) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::StatisticalPower(format!("{} samples, need at least 2 for a standard error", samples.len())));
    }
    f.check_inside(common_window(samples)?)?;
    Ok(samples.iter().map(|s| (-f.pair(s)).exp()).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `K̂(f) = -log mean exp(-⟨Z, f⟩)` with a delta-method standard error.
pub fn empirical_cumulant(samples: &[PointConfiguration], f: &TestFunction) -> Result<Estimate> {
    let e = laplace_terms(samples, f)?;
    let m = mean(&e);
    if !(m > 0.0) {
        return Err(Error::StatisticalPower("every sample has exp(-<Z,f>) = 0".into()));
    }
    let n = e.len() as f64;
    let var = e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Estimate { value: -m.ln(), se: (var / n).sqrt() / m })
}

/// Both sides of `K(f(· + x)) = e^x K(f)` on one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftTest {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(lhs - rhs)/se`, with `se` from the joint delta method.
    pub z: f64,
}

pub fn exp_shift_test(samples: &[PointConfiguration], f: &TestFunction, x: f64) -> Result<ShiftTest> {
    let g = f.shifted(x);
    let a = laplace_terms(samples, &g)?;
    let b = laplace_terms(samples, f)?;
    let (ma, mb) = (mean(&a), mean(&b));
    if !(ma > 0.0 && mb > 0.0) {
        return Err(Error::StatisticalPower("degenerate Laplace functional".into()));
    }
    let lhs = -ma.ln();
    let rhs = -x.exp() * mb.ln();
    let n = a.len() as f64;
    let infl: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| -(ai - ma) / ma + x.exp() * (bi - mb) / mb).collect();
    let mi = mean(&infl);
    let var = infl.iter().map(|v| (v - mi).powi(2)).sum::<f64>() / (n - 1.0).max(1.0) / n;
    let diff = lhs - rhs;
    let z = if diff == 0.0 { 0.0 } else { diff / var.sqrt() };
    Ok(ShiftTest { x, lhs, rhs, z })
}

/// Studentized difference of `K̂(f)` between two independent sample sets.
pub fn cumulant_two_sample(a: &[PointConfiguration], b: &[PointConfiguration], f: &TestFunction) -> Result<f64> {
    let ka = empirical_cumulant(a, f)?;
    let kb = empirical_cumulant(b, f)?;
    Ok((ka.value - kb.value) / ka.se.hypot(kb.se))
}

/// Mean atom counts per bin and the slope of the fitted log-intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityProfile {
    pub edges: Vec<f64>,
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    /// Weighted fit of `log(mean / width)` against bin centres.
    pub fit: LineFit,
}

pub fn intensity_profile(samples: &[PointConfiguration], edges: &[f64]) -> Result<IntensityProfile> {
    if samples.len() < 1000 {
        return Err(Error::StatisticalPower(format!("{} samples, need at least 1000", samples.len())));
    }
    if edges.len() < 3 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("need at least two bins with increasing edges");
    }
    let n = samples.len() as f64;
    let nb = edges.len() - 1;
    let mut sum = vec![0.0; nb];
    let mut sum2 = vec![0.0; nb];
    for s in samples {
        for (j, w) in edges.windows(2).enumerate() {
            let c = s.atoms().iter().filter(|x| **x >= w[0] && **x < w[1]).count() as f64;
            sum[j] += c;
            sum2[j] += c * c;
        }
    }
    let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let ses: Vec<f64> = sum2.iter().zip(&means).map(|(s2, m)| ((s2 / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()).collect();
    let empty = means.iter().filter(|m| **m == 0.0).count();
    if 2 * empty > nb {
        return Err(Error::StatisticalPower(format!("{empty} of {nb} bins are empty")));
    }
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (j, e) in edges.windows(2).enumerate() {
        if means[j] > 0.0 && ses[j] > 0.0 {
            x.push(0.5 * (e[0] + e[1]));
            y.push((means[j] / (e[1] - e[0])).ln());
            w.push((means[j] / ses[j]).powi(2));
        }
    }
    let fit = wls(&x, &y, &w)?;
    Ok(IntensityProfile { edges: edges.to_vec(), means, ses, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn configs(atoms: &[&[f64]]) -> Vec<PointConfiguration> {
        atoms.iter().map(|a| PointConfiguration::new(a.to_vec(), (-5.0, 5.0)).unwrap()).collect()
    }

    #[test]
    fn zero_function_has_zero_cumulant() {
        let s = configs(&[&[0.1, 0.2], &[], &[1.0]]);
        let k = empirical_cumulant(&s, &TestFunction::Step { lo: 0.0, hi: 1.0, height: 0.0 }).unwrap();
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn tent_evaluates_piecewise_linearly() {
        let f = TestFunction::Tent { lo: 0.0, hi: 2.0, height: 4.0 };
        assert_eq!(f.eval(1.0), 4.0);
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.shifted(0.5).eval(0.5), 4.0);
    }

    #[test]
    fn zero_shift_gives_zero_score() {
        let s = configs(&[&[0.1, 0.2], &[], &[0.7]]);
        let t = exp_shift_test(&s, &TestFunction::indicator(0.0, 1.0), 0.0).unwrap();
        assert_eq!(t.lhs, t.rhs);
        assert_eq!(t.z, 0.0);
    }

    #[test]
    fn support_must_stay_in_window() {
        let s = configs(&[&[0.0]]);
        assert!(empirical_cumulant(&s, &TestFunction::indicator(4.0, 6.0)).is_err());
        assert!(exp_shift_test(&s, &TestFunction::indicator(-4.5, -4.0), 1.0).is_err());
    }

    #[test]
    fn all_mass_at_zero_is_a_power_error() {
        let s = configs(&[&[0.5], &[0.5]]);
        let f = TestFunction::Step { lo: 0.0, hi: 1.0, height: 1e4 };
        assert!(matches!(empirical_cumulant(&s, &f), Err(Error::StatisticalPower(_))));
    }
}
