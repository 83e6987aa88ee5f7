use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad::{integrate_pieces, Quadrature};

/// Beyond this point `y^n Λ(dy)` is below `1e-20` for every supported `n`.
const UPPER: f64 = 80.0;
const QUAD_TOL: f64 = 1e-12;

/// Parameters of the front's limiting Lévy process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    /// Free drift `c`.
    pub drift_c: f64,
    /// Multiplier of the jump measure, `π²` for the front.
    pub intensity_scale: f64,
    /// Jumps at or below this size are dropped by the sampler.
    pub jump_cutoff_eps: f64,
    /// Jumps up to this size are compensated.
    pub compensation_level: f64,
}

impl Default for LevySpec {
    fn default() -> Self {
        LevySpec { drift_c: 0.0, intensity_scale: PI * PI, jump_cutoff_eps: 1e-4, compensation_level: 1.0 }
    }
}

impl LevySpec {
    pub fn with_eps(eps: f64) -> Result<Self> {
        let spec = LevySpec { jump_cutoff_eps: eps, ..Self::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift_c.is_finite() {
            return domain("drift must be finite");
        }
        if !(self.intensity_scale > 0.0 && self.intensity_scale.is_finite()) {
            return domain(format!("intensity scale must be positive, got {}", self.intensity_scale));
        }
        if !(self.jump_cutoff_eps > 0.0 && self.jump_cutoff_eps < self.compensation_level) {
            return domain(format!(
                "need 0 < eps < compensation level, got eps = {} and level = {}",
                self.jump_cutoff_eps, self.compensation_level
            ));
        }
        if !self.compensation_level.is_finite() {
            return domain("compensation level must be finite");
        }
        Ok(())
    }

    /// Rate of retained jumps, `scale · Λ̄(ε)`.
    pub fn jump_rate(&self) -> f64 {
        self.intensity_scale / self.jump_cutoff_eps.exp_m1()
    }

    /// Deterministic drift of the sampler per unit time: `c` minus the
    /// compensator of retained jumps in `(ε, level]`.
    pub fn sampler_drift(&self) -> Result<Quadrature> {
        self.validate()?;
        let q = integrate_pieces(|y| y * levy_density(y), &[(self.jump_cutoff_eps, self.compensation_level)], QUAD_TOL)?;
        Ok(Quadrature { value: self.drift_c - self.intensity_scale * q.value, error: self.intensity_scale * q.error, ..q })
    }

    /// Mean of `L_1 - c`: the uncompensated jumps above the level.
    pub fn mean_offset(&self) -> Result<Quadrature> {
        let q = integrate_pieces(|y| y * levy_density(y), &[(self.compensation_level, UPPER)], QUAD_TOL)?;
        Ok(Quadrature { value: self.intensity_scale * q.value, error: self.intensity_scale * q.error, ..q })
    }

    /// Variance that the sampler loses by dropping jumps below `ε`.
    pub fn small_jump_variance(&self) -> Result<Quadrature> {
        self.dropped_moment(0.0, self.jump_cutoff_eps)
    }

    /// `scale · ∫_lo^hi y² Λ(dy)`.
    pub fn dropped_moment(&self, lo: f64, hi: f64) -> Result<Quadrature> {
        let q = integrate_pieces(|y| y * y * levy_density(y), &[(lo, hi)], QUAD_TOL)?;
        Ok(Quadrature { value: self.intensity_scale * q.value, error: self.intensity_scale * q.error, ..q })
    }

    /// Inverse-CDF map from `u ∈ (0, 1]` to a retained jump size.
    pub fn jump_size(&self, u: f64) -> f64 {
        (self.jump_cutoff_eps.exp_m1() / u).ln_1p()
    }
}

/// Tail `Λ̄(y) = Λ((y, ∞)) = 1/(e^y - 1)`.
pub fn levy_tail(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return domain(format!("jump tail needs y > 0, got {y}"));
    }
    Ok(y.exp_m1().recip())
}

/// Density `e^y/(e^y - 1)²` of `Λ`, written to stay finite for large `y`.
pub fn levy_density(y: f64) -> f64 {
    let e = (-y).exp();
    let d = -(-y).exp_m1();
    e / (d * d)
}

/// `scale · ∫ y^n Λ(dy)` by quadrature; equals `scale · n! ζ(n)`.
pub fn cumulant_n(spec: &LevySpec, n: u32) -> Result<Quadrature> {
    let q = moment_n(n)?;
    Ok(Quadrature { value: spec.intensity_scale * q.value, error: spec.intensity_scale * q.error, ..q })
}

/// `∫ y^n Λ(dy)` for `n ≥ 2`.
pub fn moment_n(n: u32) -> Result<Quadrature> {
    if n < 2 {
        return domain(format!("moment of order {n} diverges at 0; need n >= 2"));
    }
    let n = n as i32;
    integrate_pieces(|y| y.powi(n) * levy_density(y), &[(0.0, 1.0), (1.0, 10.0), (10.0, UPPER)], QUAD_TOL)
}

/// `sin x - x` without cancellation near 0.
fn sin_minus_id(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x.sin() - x
    }
}

/// `scale ∫_lo^∞ (e^{iλy} - 1 - iλy 1_{y≤level}) Λ(dy)`.
fn log_charfn(spec: &LevySpec, lambda: f64, lo: f64) -> Result<Complex64> {
    let level = spec.compensation_level;
    let tol = 1e-12;
    let cos_part = |y: f64| {
        let s = (0.5 * lambda * y).sin();
        -2.0 * s * s * levy_density(y)
    };
    let re = integrate_pieces(cos_part, &[(lo, level), (level, 10.0), (10.0, UPPER)], tol)?;
    let im_low = integrate_pieces(|y| sin_minus_id(lambda * y) * levy_density(y), &[(lo, level)], tol)?;
    let im_high = integrate_pieces(|y| (lambda * y).sin() * levy_density(y), &[(level, 10.0), (10.0, UPPER)], tol)?;
    Ok(spec.intensity_scale * Complex64::new(re.value, im_low.value + im_high.value))
}

/// Characteristic function of `L_1`: `exp(iλc + scale ∫(e^{iλy} - 1 - iλy 1_{y≤1}) Λ(dy))`.
pub fn levy_charfn(spec: &LevySpec, lambda: f64) -> Result<Complex64> {
    spec.validate()?;
    if lambda == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let psi = log_charfn(spec, lambda, 0.0)? + Complex64::new(0.0, lambda * spec.drift_c);
    Ok(psi.exp())
}

/// Characteristic function of the sampler's `L_1`, which omits jumps below `ε`.
pub fn sampled_charfn(spec: &LevySpec, lambda: f64) -> Result<Complex64> {
    spec.validate()?;
    if lambda == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let psi = log_charfn(spec, lambda, spec.jump_cutoff_eps)? + Complex64::new(0.0, lambda * spec.drift_c);
    Ok(psi.exp())
}
