//! Jacobi-theta-type kernels for Brownian motion killed outside an interval.
//!
//! The basic object is
//!
//! ```text
//! θ(x, t) = 1/2 + Σ_{n≥1} exp(-π² n² t / 2) cos(π n x)
//!         = Σ_{n∈Z} (2πt)^{-1/2} exp(-(x - 2n)² / (2t)),
//! ```
//!
//! the heat kernel on the circle R/2Z. The Fourier form converges fast for
//! large `t`, the Gaussian (image) form for small `t`; evaluation switches at
//! [`CROSSOVER`]. Everything else in this module (killed densities, exit
//! densities, the taboo process, the barrier function) is built from these
//! two series.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::quad;

/// Dimensionless time at which evaluation switches from the Gaussian to the
/// Fourier representation.
pub const CROSSOVER: f64 = 0.5;

/// Default absolute tolerance for every kernel evaluation.
pub const DEFAULT_TOL: f64 = 1e-12;

const PI2: f64 = PI * PI;

/// Width of the killing interval `[0, a]` together with the derived drift
/// `mu = sqrt(1 - π²/a²)` and the evaluation tolerance.
///
/// Widths below π are accepted for the pure kernels (the unit interval is the
/// natural scale for many identities); only the drift-dependent operations
/// require `a ≥ π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalKernel {
    a: f64,
    mu: Option<f64>,
    tol: f64,
}

impl IntervalKernel {
    pub fn new(a: f64) -> Result<Self> {
        Self::with_tol(a, DEFAULT_TOL)
    }

    pub fn with_tol(a: f64, tol: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return domain(format!("interval width must be positive, got {a}"));
        }
        if !(tol > 0.0) {
            return domain(format!("tolerance must be positive, got {tol}"));
        }
        let mu = (a >= PI).then(|| (1.0 - PI2 / (a * a)).sqrt());
        Ok(Self { a, mu, tol })
    }

    pub fn width(&self) -> f64 {
        self.a
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The drift `sqrt(1 - π²/a²)`; defined only for `a ≥ π`.
    pub fn mu(&self) -> Result<f64> {
        match self.mu {
            Some(mu) => Ok(mu),
            None => domain(format!("drift requires a >= π, got a = {}", self.a)),
        }
    }

    fn check_point(&self, name: &str, x: f64) -> Result<()> {
        if !(0.0..=self.a).contains(&x) {
            return domain(format!("{name} = {x} outside [0, {}]", self.a));
        }
        Ok(())
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t > 0.0) || t.is_nan() {
            return domain(format!("time must be positive, got {t}"));
        }
        Ok(())
    }

    /// Transition density `p_t^a(x, y)` of Brownian motion killed on leaving `(0, a)`.
    pub fn killed_density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        self.check_point("x", x)?;
        self.check_point("y", y)?;
        Self::check_time(t)?;
        let tau = t / (self.a * self.a);
        Ok((killed_unit_renormalized(x / self.a, y / self.a, tau, self.tol * self.a)
            * (-PI2 * tau / 2.0).exp()
            / self.a)
            .max(0.0))
    }

    /// `exp(π² t / (2a²)) · p_t^a(x, y)`, computed without the overflow-prone product.
    pub fn renormalized_killed_density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        self.check_point("x", x)?;
        self.check_point("y", y)?;
        Self::check_time(t)?;
        let tau = t / (self.a * self.a);
        Ok((killed_unit_renormalized(x / self.a, y / self.a, tau, self.tol * self.a) / self.a).max(0.0))
    }

    /// `exp(mu(x-y) + π²t/(2a²)) p_t^a(x, y)`: the expected-particle density of
    /// BBM with drift `-mu` killed at `{0, a}`.
    pub fn bbm_weighted_density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let mu = self.mu()?;
        Ok((mu * (x - y)).exp() * self.renormalized_killed_density(x, y, t)?)
    }

    /// Density `r_t^a(x)` of exiting through `a` at time `t`.
    pub fn exit_density(&self, x: f64, t: f64) -> Result<f64> {
        self.check_point("x", x)?;
        Self::check_time(t)?;
        let a2 = self.a * self.a;
        let tau = t / a2;
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok((exit_unit_renormalized(x / self.a, tau, self.tol * a2) * (-PI2 * tau / 2.0).exp() / a2).max(0.0))
    }

    /// `I^a(x, S)` and, when `y` is given, `J^a(x, y, S)`.
    pub fn exit_integrals(&self, x: f64, s: &TimeSet, y: Option<f64>) -> Result<ExitIntegrals> {
        self.check_point("x", x)?;
        if let Some(y) = y {
            self.check_point("y", y)?;
        }
        let a = self.a;
        let a2 = a * a;
        let target = self.tol * s.measure().max(1.0);
        let pieces: Vec<(f64, f64)> = s.intervals().to_vec();
        let (i, i_err) = if x == 0.0 {
            (0.0, 0.0)
        } else {
            let unit_tol = self.tol * a2;
            let q = quad::integrate_pieces(
                |u| if u <= 0.0 { 0.0 } else { exit_unit_renormalized(x / a, u / a2, unit_tol) / a2 },
                &pieces,
                target,
            )?;
            (q.value, q.error)
        };
        let j = match y {
            None => None,
            Some(y) => {
                let q = quad::integrate_pieces(
                    |u| {
                        if u <= 0.0 {
                            0.0
                        } else {
                            killed_unit_renormalized(x / a, y / a, u / a2, self.tol * a) / a
                        }
                    },
                    &pieces,
                    target,
                )?;
                Some((q.value, q.error))
            }
        };
        Ok(ExitIntegrals { i, i_err, j: j.map(|v| v.0), j_err: j.map(|v| v.1) })
    }

    /// Transition density of the Brownian taboo process on `(0, a)`.
    pub fn taboo_density(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(x > 0.0 && x < self.a) {
            return domain(format!("taboo process cannot start at the entrance boundary, x = {x}"));
        }
        self.check_point("y", y)?;
        Self::check_time(t)?;
        let a = self.a;
        let tau = t / (a * a);
        let (xi, eta) = (x / a, y / a);
        let value = if tau >= CROSSOVER {
            // sin(nπξ)/sin(πξ) = U_{n-1}(cos πξ), so the ratio never divides by zero.
            let c = (PI * xi).cos();
            let (mut u_prev, mut u) = (0.0, 1.0);
            let s_eta = (PI * eta).sin();
            let mut sum = 0.0;
            let mut n = 1u32;
            loop {
                let nf = f64::from(n);
                let damp = (-PI2 * (nf * nf - 1.0) * tau / 2.0).exp();
                sum += damp * u * (PI * nf * eta).sin();
                let next_bound = (nf + 1.0) * (-PI2 * ((nf + 1.0).powi(2) - 1.0) * tau / 2.0).exp();
                if n > 1 && next_bound < self.tol / 10.0 {
                    break;
                }
                let u_next = 2.0 * c * u - u_prev;
                u_prev = u;
                u = u_next;
                n += 1;
            }
            2.0 / a * sum * s_eta
        } else {
            (PI * eta).sin() / (PI * xi).sin() * self.renormalized_killed_density(x, y, t)?
        };
        Ok(value.max(0.0))
    }

    /// Stationary density `(2/a) sin²(πy/a)` of the taboo process.
    pub fn taboo_stationary(&self, y: f64) -> Result<f64> {
        self.check_point("y", y)?;
        Ok(2.0 / self.a * (PI * y / self.a).sin().powi(2))
    }
}

/// Output of [`IntervalKernel::exit_integrals`], with quadrature error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitIntegrals {
    pub i: f64,
    pub i_err: f64,
    pub j: Option<f64>,
    pub j_err: Option<f64>,
}

/// A finite union of disjoint, sorted, bounded time intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSet {
    intervals: Vec<(f64, f64)>,
}

impl TimeSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(lo >= 0.0 && lo < hi) {
                return domain(format!("bad interval [{lo}, {hi}]"));
            }
            if !hi.is_finite() {
                return domain("unbounded time set: the exit integrand does not decay, so the integral diverges");
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return domain("time intervals must be sorted and disjoint");
        }
        Ok(Self { intervals })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn inf(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { intervals: self.intervals.iter().map(|(a, b)| (a * factor, b * factor)).collect() }
    }
}

// ---------------------------------------------------------------------------
// Series engines

/// Sums `Σ_{n≥1} term(n)` where `|term(n)| ≤ bound(n)` and `bound` eventually
/// decays faster than geometrically. Stops once the next bound is below
/// `tol/10` and the bounds shrink by at least half per step, so the neglected
/// tail is below `tol/5`.
fn decaying_sum(tol: f64, mut term: impl FnMut(u32) -> f64, bound: impl Fn(u32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 1u32;
    loop {
        sum += term(n);
        let next = bound(n + 1);
        if next < tol / 10.0 && bound(n + 2) <= 0.5 * next || n > 1_000_000 {
            return sum;
        }
        n += 1;
    }
}

/// Reduces `x` to the representative in `[-1, 1]` modulo 2.
fn reduce(x: f64) -> f64 {
    x - 2.0 * (x / 2.0).round()
}

/// Sums `Σ_n h(x - 2n)` over images, walking outwards from the nearest one
/// until the bound on the next pair drops below `tol/10`.
fn image_sum(x: f64, tol: f64, h: impl Fn(f64) -> f64, pair_bound: impl Fn(f64) -> f64) -> f64 {
    let r = reduce(x);
    let mut sum = h(r);
    let mut k = 1.0;
    loop {
        sum += h(r - 2.0 * k) + h(r + 2.0 * k);
        // Nearest image in the next shell is at distance >= 2(k+1) - 1.
        let dist = 2.0 * (k + 1.0) - 1.0;
        if pair_bound(dist) < tol / 10.0 && pair_bound(dist + 2.0) <= 0.5 * pair_bound(dist) || k > 1e6 {
            return sum;
        }
        k += 1.0;
    }
}

fn gauss(u: f64, t: f64) -> f64 {
    let e = -u * u / (2.0 * t);
    if e < -745.0 {
        0.0
    } else {
        (e - 0.5 * (2.0 * PI * t).ln()).exp()
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || t.is_nan() {
        return domain(format!("time must be positive, got {t}"));
    }
    Ok(())
}

/// `θ(x, t)` from the Fourier series.
pub fn theta_fourier(x: f64, t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    let c = -PI2 * t / 2.0;
    Ok(0.5
        + decaying_sum(
            tol,
            |n| {
                let nf = f64::from(n);
                (c * nf * nf).exp() * (PI * nf * x).cos()
            },
            |n| (c * f64::from(n).powi(2)).exp(),
        ))
}

/// `θ(x, t)` from the Gaussian image sum.
pub fn theta_gaussian(x: f64, t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    Ok(image_sum(x, tol, |u| gauss(u, t), |d| 2.0 * gauss(d, t)))
}

/// `θ(x, t)` to absolute accuracy `tol`, choosing the faster representation.
pub fn theta_with_tol(x: f64, t: f64, tol: f64) -> Result<f64> {
    if t >= CROSSOVER {
        theta_fourier(x, t, tol)
    } else {
        theta_gaussian(x, t, tol)
    }
}

/// `θ(x, t)` at the default tolerance.
pub fn theta(x: f64, t: f64) -> Result<f64> {
    theta_with_tol(x, t, DEFAULT_TOL)
}

/// `∂θ/∂x` at the default tolerance.
pub fn theta_dx(x: f64, t: f64) -> Result<f64> {
    theta_dx_with_tol(x, t, DEFAULT_TOL)
}

pub fn theta_dx_with_tol(x: f64, t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    if t >= CROSSOVER {
        let c = -PI2 * t / 2.0;
        Ok(-PI
            * decaying_sum(
                tol / PI,
                |n| {
                    let nf = f64::from(n);
                    nf * (c * nf * nf).exp() * (PI * nf * x).sin()
                },
                |n| f64::from(n) * (c * f64::from(n).powi(2)).exp(),
            ))
    } else {
        // u e^{-u²/2t} decreases once u > sqrt(t); images start at distance 1 > sqrt(t).
        Ok(image_sum(x, tol, |u| -u / t * gauss(u, t), |d| 2.0 * d / t * gauss(d, t)))
    }
}

/// `∂θ/∂t` (equal to `½ ∂²θ/∂x²`).
pub fn theta_dt_with_tol(x: f64, t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    if t >= CROSSOVER {
        let c = -PI2 * t / 2.0;
        Ok(-PI2 / 2.0
            * decaying_sum(
                2.0 * tol / PI2,
                |n| {
                    let nf = f64::from(n);
                    nf * nf * (c * nf * nf).exp() * (PI * nf * x).cos()
                },
                |n| f64::from(n).powi(2) * (c * f64::from(n).powi(2)).exp(),
            ))
    } else {
        Ok(image_sum(x, tol, |u| gauss_dt(u, t), |d| 2.0 * (d * d / (2.0 * t * t) + 0.5 / t) * gauss(d, t)))
    }
}

fn gauss_dt(u: f64, t: f64) -> f64 {
    let g = gauss(u, t);
    if g == 0.0 {
        0.0
    } else {
        g * (u * u / (2.0 * t * t) - 0.5 / t)
    }
}

fn gauss_dtt(u: f64, t: f64) -> f64 {
    let g = gauss(u, t);
    if g == 0.0 {
        return 0.0;
    }
    let a = u * u / (2.0 * t * t) - 0.5 / t;
    g * (a * a - u * u / (t * t * t) + 0.5 / (t * t))
}

/// `E_t = π² Σ_{n≥2} n² exp(-π²(n²-1)t/2)`, the relative error of the
/// one-mode approximation of the killed kernel at dimensionless time `t`.
pub fn error_term(t: f64) -> Result<f64> {
    error_term_with_tol(t, DEFAULT_TOL)
}

pub fn error_term_with_tol(t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    let c = -PI2 * t / 2.0;
    let bound = |n: u32| {
        let nf = f64::from(n + 1);
        nf * nf * (c * (nf * nf - 1.0)).exp()
    };
    Ok(PI2 * decaying_sum(tol / PI2, bound, |n| bound(n)))
}

/// `θ̄(t) = (2/π²) e^{π²t/2} ∂_t θ(1, t)`, increasing from 0 to 1.
pub fn theta_bar(t: f64) -> Result<f64> {
    theta_bar_with_tol(t, DEFAULT_TOL)
}

pub fn theta_bar_with_tol(t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("theta_bar needs t >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(1.0);
    }
    if t >= CROSSOVER {
        let c = -PI2 * t / 2.0;
        let sign = |n: u32| if n % 2 == 1 { 1.0 } else { -1.0 };
        Ok(decaying_sum(
            tol,
            |n| {
                let nf = f64::from(n);
                sign(n) * nf * nf * (c * (nf * nf - 1.0)).exp()
            },
            |n| f64::from(n).powi(2) * (c * (f64::from(n).powi(2) - 1.0)).exp(),
        ))
    } else {
        let scale = 2.0 / PI2 * (PI2 * t / 2.0).exp();
        let s = image_sum(1.0, tol / scale, |u| gauss_dt(u, t), |d| 2.0 * (d * d / (2.0 * t * t) + 0.5 / t) * gauss(d, t));
        Ok((scale * s).clamp(0.0, 1.0))
    }
}

/// Derivative of [`theta_bar`].
pub fn theta_bar_dt(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("theta_bar needs t >= 0, got {t}"));
    }
    if t == 0.0 || t.is_infinite() {
        return Ok(0.0);
    }
    let tol = DEFAULT_TOL;
    if t >= CROSSOVER {
        let c = -PI2 * t / 2.0;
        let sign = |n: u32| if n % 2 == 1 { 1.0 } else { -1.0 };
        Ok(decaying_sum(
            tol,
            |n| {
                let nf = f64::from(n);
                let k = nf * nf - 1.0;
                -sign(n) * nf * nf * PI2 * k / 2.0 * (c * k).exp()
            },
            |n| {
                let nf = f64::from(n);
                let k = nf * nf - 1.0;
                nf * nf * PI2 * k / 2.0 * (c * k).exp()
            },
        ))
    } else {
        let scale = 2.0 / PI2 * (PI2 * t / 2.0).exp();
        let bound = |d: f64| {
            let g = gauss(d, t);
            let a = d * d / (2.0 * t * t) + 0.5 / t;
            2.0 * g * (a * a + d * d / (t * t * t) + 0.5 / (t * t) + PI2 / 2.0 * a)
        };
        let s = image_sum(1.0, tol / scale, |u| PI2 / 2.0 * gauss_dt(u, t) + gauss_dtt(u, t), bound);
        Ok(scale * s)
    }
}

/// The barrier function `f_Δ(t) = log(1 + (e^Δ - 1) θ̄(t))` for `t > 0`, zero
/// for `t ≤ 0`, together with its time derivative.
pub fn barrier_fn(delta: f64, t: f64) -> Result<(f64, f64)> {
    if !(delta >= 0.0) {
        return domain(format!("barrier shift must be >= 0, got {delta}"));
    }
    if t <= 0.0 || delta == 0.0 {
        return Ok((0.0, 0.0));
    }
    let s = theta_bar(t)?;
    let ds = theta_bar_dt(t)?;
    if delta <= 30.0 {
        let k = delta.exp_m1();
        let denom = 1.0 + k * s;
        Ok(((k * s).ln_1p(), k * ds / denom))
    } else {
        // log(1 + (e^Δ-1)s) = Δ + log(s + (1-s)e^{-Δ}); avoids overflow for huge shifts.
        let tail = (-delta).exp();
        let inner = s + (1.0 - s) * tail;
        if inner <= 0.0 {
            return Ok((0.0, 0.0));
        }
        Ok((delta + inner.ln(), (1.0 - tail) * ds / inner))
    }
}

/// `e^{π²τ/2} · p_τ^1(ξ, η)` on the unit interval.
fn killed_unit_renormalized(xi: f64, eta: f64, tau: f64, tol: f64) -> f64 {
    if xi <= 0.0 || xi >= 1.0 || eta <= 0.0 || eta >= 1.0 {
        return 0.0;
    }
    if tau >= CROSSOVER {
        let c = -PI2 * tau / 2.0;
        2.0 * decaying_sum(
            tol / 2.0,
            |n| {
                let nf = f64::from(n);
                (c * (nf * nf - 1.0)).exp() * (PI * nf * xi).sin() * (PI * nf * eta).sin()
            },
            |n| (c * (f64::from(n).powi(2) - 1.0)).exp(),
        )
    } else {
        let scale = (PI2 * tau / 2.0).exp();
        let t = tol / scale;
        scale
            * (image_sum(xi - eta, t / 2.0, |u| gauss(u, tau), |d| 2.0 * gauss(d, tau))
                - image_sum(xi + eta, t / 2.0, |u| gauss(u, tau), |d| 2.0 * gauss(d, tau)))
    }
}

/// `e^{π²τ/2} · θ'(ξ - 1, τ)` on the unit interval (the exit density up to `a⁻²`).
fn exit_unit_renormalized(xi: f64, tau: f64, tol: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    if tau >= CROSSOVER {
        let c = -PI2 * tau / 2.0;
        PI * decaying_sum(
            tol / PI,
            |n| {
                let nf = f64::from(n);
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign * nf * (c * (nf * nf - 1.0)).exp() * (PI * nf * xi).sin()
            },
            |n| f64::from(n) * (c * (f64::from(n).powi(2) - 1.0)).exp(),
        )
    } else {
        let scale = (PI2 * tau / 2.0).exp();
        scale
            * image_sum(
                xi - 1.0,
                tol / scale,
                |u| -u / tau * gauss(u, tau),
                |d| 2.0 * d / tau * gauss(d, tau),
            )
    }
}
