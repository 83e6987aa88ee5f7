//! Travelling wave `½ψ'' - cψ' = β₀(ψ - f(ψ))`, `ψ(-∞) = 1`, `ψ(+∞) = q*`.

use serde::Serialize;

use super::ReproductionLaw;
use crate::error::{domain, Error, Result};

/// Grid and fitting parameters for [`travelling_wave`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveGrid {
    pub step: f64,
    /// Integration stops once `1 - ψ` drops below this.
    pub u_stop: f64,
    /// The left tail is fitted where `1 - ψ` lies in this range.
    pub fit_window: (f64, f64),
}

impl Default for WaveGrid {
    fn default() -> Self {
        Self { step: 1e-3, u_stop: 1e-22, fit_window: (1e-17, 1e-12) }
    }
}

/// Tabulated wave on a uniform grid, translated so that
/// `1 - ψ(z) ~ |z| e^{z}` (critical speed) or `~ e^{λ z}` (faster speeds).
#[derive(Debug, Clone, Serialize)]
pub struct TravellingWave {
    pub c: f64,
    pub beta0: f64,
    pub q_star: f64,
    /// Left decay rate `λ = c - sqrt(c² - 1)`.
    pub lambda: f64,
    /// Right decay rate of `ψ - q*`.
    pub right_rate: f64,
    /// Subleading left coefficient: `1 - ψ(z) ≈ (|z| + b) e^z` (critical) or
    /// `e^{λz} + b e^{λ̄z}`.
    pub left_b: f64,
    /// Translation applied to the raw shooting solution.
    pub shift: f64,
    /// Sup-norm of the ODE residual over the interior grid.
    pub residual: f64,
    z0: f64,
    h: f64,
    u: Vec<f64>,
    du: Vec<f64>,
    #[serde(skip)]
    law: ReproductionLaw,
}

impl TravellingWave {
    pub fn domain(&self) -> (f64, f64) {
        (self.z0, self.z0 + self.h * (self.u.len() - 1) as f64)
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.u.len()).map(move |i| self.z0 + self.h * i as f64)
    }

    /// `1 - ψ(z)`, accurate in relative terms far to the left.
    pub fn one_minus_psi(&self, z: f64) -> f64 {
        let (lo, hi) = self.domain();
        if z < lo {
            return if self.critical() {
                (-z + self.left_b) * z.exp()
            } else {
                (self.lambda * z).exp()
            };
        }
        if z >= hi {
            let end = *self.u.last().expect("nonempty grid");
            let v_end = 1.0 - self.q_star - end;
            return 1.0 - self.q_star - v_end * (self.right_rate * (z - hi)).exp();
        }
        let pos = (z - self.z0) / self.h;
        let i = (pos.floor() as usize).min(self.u.len() - 2);
        let s = pos - i as f64;
        // Cubic Hermite on (u, u').
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s).powi(2),
            s * (1.0 - s).powi(2),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        h00 * self.u[i] + h10 * self.h * self.du[i] + h01 * self.u[i + 1] + h11 * self.h * self.du[i + 1]
    }

    pub fn psi(&self, z: f64) -> f64 {
        1.0 - self.one_minus_psi(z)
    }

    fn critical(&self) -> bool {
        (self.c - 1.0).abs() < 1e-12
    }

    /// Residual `½ψ'' - cψ' - β₀(ψ - f(ψ))` at grid node `i` (interior only).
    fn residual_at(&self, i: usize) -> f64 {
        let d = &self.du;
        let upp = (-d[i + 2] + 8.0 * d[i + 1] - 8.0 * d[i - 1] + d[i - 2]) / (12.0 * self.h);
        // ψ = 1 - u: ½ψ'' - cψ' = -½u'' + cu'.
        -0.5 * upp + self.c * d[i] - self.beta0 * self.law.one_minus_defect(self.u[i])
    }
}

/// Solves for the travelling wave of speed `c ≥ 1` by shooting along the
/// one-dimensional manifold leaving the fixed point `q*`.
pub fn travelling_wave(law: &ReproductionLaw, c: f64, grid: WaveGrid) -> Result<TravellingWave> {
    if !(c >= 1.0) || !c.is_finite() {
        return domain(format!("travelling waves need c >= 1, got {c}"));
    }
    let beta0 = law.beta0();
    let q_star = law.extinction_probability();
    let gap = 1.0 - q_star;
    let right_rate = c - (c * c + 2.0 * beta0 * (1.0 - law.pgf_derivative(q_star))).sqrt();
    if !(right_rate < 0.0) {
        return Err(Error::Solver(format!("no decaying mode at q*: rate {right_rate}")));
    }
    let lambda = c - (c * c - 1.0).max(0.0).sqrt();
    let h = grid.step;

    // u = 1 - ψ; u'' = 2c u' - 2β₀ h(u).
    let rhs = |u: f64, du: f64| -> (f64, f64) { (du, 2.0 * c * du - 2.0 * beta0 * law.one_minus_defect(u)) };

    let v0 = 1e-10 * gap;
    let mut u = gap - v0;
    let mut du = -right_rate * v0;
    let mut us = vec![u];
    let mut dus = vec![du];
    let max_steps = (400.0 / h) as usize;
    while u > grid.u_stop {
        if us.len() > max_steps {
            return Err(Error::Solver("shooting did not reach the left state within the step budget".into()));
        }
        // RK4 with step -h.
        let hs = -h;
        let k1 = rhs(u, du);
        let k2 = rhs(u + 0.5 * hs * k1.0, du + 0.5 * hs * k1.1);
        let k3 = rhs(u + 0.5 * hs * k2.0, du + 0.5 * hs * k2.1);
        let k4 = rhs(u + hs * k3.0, du + hs * k3.1);
        u += hs / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        du += hs / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(u.is_finite() && u <= gap && du >= 0.0) {
            return Err(Error::Solver(format!(
                "shooting left the monotone corridor after {} steps (u = {u}, u' = {du})",
                us.len()
            )));
        }
        us.push(u);
        dus.push(du);
    }
    us.reverse();
    dus.reverse();
    let n = us.len();
    // Raw coordinate of node i is (i - (n-1)) h, so the shooting start sits at 0.
    let raw_z = |i: usize| (i as f64 - (n - 1) as f64) * h;

    let (lo, hi) = grid.fit_window;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &ui) in us.iter().enumerate() {
        if ui >= lo && ui <= hi {
            let z = raw_z(i);
            xs.push(-z);
            ys.push(ui * (-lambda * z).exp());
        }
    }
    if xs.len() < 10 {
        return Err(Error::Solver("left fitting window holds too few grid points".into()));
    }
    let critical = (c - 1.0).abs() < 1e-12;
    let (shift, left_b) = if critical {
        // u e^{-z} = A|z| + B; translating by ln A makes the leading coefficient 1.
        let fit = crate::stats::ols(&xs, &ys)?;
        let (a, b) = (fit.slope, fit.intercept);
        if !(a > 0.0) {
            return Err(Error::Solver(format!("non-positive tail coefficient {a}")));
        }
        (a.ln(), a.ln() + b / a)
    } else {
        let lambda_bar = c + (c * c - 1.0).sqrt();
        let zs: Vec<f64> = xs.iter().map(|x| -x).collect();
        let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (z, yv) in zs.iter().zip(&ys) {
            let g = ((lambda_bar - lambda) * z).exp();
            s00 += 1.0;
            s01 += g;
            s11 += g * g;
            r0 += yv;
            r1 += yv * g;
        }
        let det = s00 * s11 - s01 * s01;
        let a = (r0 * s11 - r1 * s01) / det;
        let b = (s00 * r1 - s01 * r0) / det;
        if !(a > 0.0) {
            return Err(Error::Solver(format!("non-positive tail coefficient {a}")));
        }
        // u(z) = a e^{λz} + b e^{λ̄z}; shifting by ln(a)/λ makes the first coefficient 1.
        let s = a.ln() / lambda;
        (s, b * (-lambda_bar * s).exp())
    };

    let z0 = raw_z(0) + shift;
    let mut wave = TravellingWave {
        c,
        beta0,
        q_star,
        lambda,
        right_rate,
        left_b,
        shift,
        residual: 0.0,
        z0,
        h,
        u: us,
        du: dus,
        law: law.clone(),
    };
    wave.residual = (2..n - 2).map(|i| wave.residual_at(i).abs()).fold(0.0, f64::max);
    Ok(wave)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_wave() -> TravellingWave {
        travelling_wave(&ReproductionLaw::binary(), 1.0, WaveGrid::default()).unwrap()
    }

    #[test]
    fn binary_wave_is_monotone_and_bounded() {
        let w = binary_wave();
        let vals: Vec<f64> = w.grid().map(|z| w.psi(z)).collect();
        assert!(vals.windows(2).all(|p| p[1] <= p[0]));
        let (lo, hi) = w.domain();
        // Far left ψ rounds to 1 in f64, so strictness is checked on 1 - ψ.
        for z in w.grid().skip(1).take_while(|z| *z < hi) {
            let u = w.one_minus_psi(z);
            assert!(u > 0.0 && u < 1.0, "1 - ψ({z}) = {u}");
        }
        assert!(lo < -40.0 && hi > 40.0);
    }

    #[test]
    fn binary_wave_residual_is_small() {
        assert!(binary_wave().residual < 1e-8);
    }

    #[test]
    fn left_tail_has_unit_constant() {
        let w = binary_wave();
        for x in [30.0, 35.0] {
            let ratio = w.one_minus_psi(-x) / (x * (-x).exp());
            assert!((ratio - 1.0 - w.left_b / x).abs() < 1e-6, "x = {x}: {ratio}");
        }
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let w = binary_wave();
        let z = w.grid().nth(1234).unwrap();
        assert!((w.one_minus_psi(z) - w.u[1234]).abs() < 1e-15);
    }

    #[test]
    fn subcritical_speed_and_extinction() {
        let law = ReproductionLaw::new(vec![0.2, 0.0, 0.5, 0.3]).unwrap();
        let w = travelling_wave(&law, 1.3, WaveGrid::default()).unwrap();
        assert!(w.residual < 1e-8);
        assert!((w.psi(200.0) - law.extinction_probability()).abs() < 1e-9);
        assert!((w.one_minus_psi(-30.0) / (-30.0 * w.lambda).exp() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_slow_speeds() {
        assert!(travelling_wave(&ReproductionLaw::binary(), 0.9, WaveGrid::default()).is_err());
    }
}
