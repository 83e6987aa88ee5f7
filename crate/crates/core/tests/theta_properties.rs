use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use bbm_lab::quad::integrate;
use bbm_lab::theta::*;
use proptest::prelude::*;

/// Time beyond which `∫_T^∞ p_t^a dt < eps` (one-mode tail bound with factor 2).
fn green_horizon(a: f64, eps: f64) -> f64 {
    2.0 * a * a / (PI * PI) * (4.0 * a / (PI * PI * eps)).ln()
}

#[test]
fn fourier_and_gaussian_forms_agree_on_grid() {
    for i in 0..=40 {
        let x = f64::from(i) * 0.05;
        for j in 0..=99 {
            let t = 0.05 + f64::from(j) * 0.05;
            let f = theta_fourier(x, t, 1e-14).unwrap();
            let g = theta_gaussian(x, t, 1e-14).unwrap();
            assert!((f - g).abs() < 1e-10, "x={x} t={t}: {f} vs {g}");
        }
    }
}

#[test]
fn heat_equation_by_finite_differences() {
    let h = 1e-4;
    for &t in &[0.08, 0.3, 0.5, 1.1] {
        for &x in &[0.2, 0.55, 0.9, 1.4] {
            let dt = (theta(x, t + h).unwrap() - theta(x, t - h).unwrap()) / (2.0 * h);
            let dxx = (theta(x + h, t).unwrap() - 2.0 * theta(x, t).unwrap() + theta(x - h, t).unwrap()) / (h * h);
            assert!((dt - 0.5 * dxx).abs() < 1e-6 * (1.0 + dt.abs()), "t={t} x={x}: {dt} vs {}", 0.5 * dxx);
            let exact = theta_dt_with_tol(x, t, 1e-13).unwrap();
            assert!((dt - exact).abs() < 1e-6 * (1.0 + dt.abs()));
        }
    }
}

#[test]
fn green_function_at_quarter_points() {
    let k = IntervalKernel::new(1.0).unwrap();
    let horizon = green_horizon(1.0, 1e-12);
    let q = integrate(|t| if t <= 0.0 { 0.0 } else { k.killed_density(0.25, 0.75, t).unwrap() }, 0.0, horizon, 1e-11).unwrap();
    assert_abs_diff_eq!(q.value, 0.125, epsilon = 1e-9);
}

#[test]
fn exit_density_integrates_to_exit_probability() {
    for (a, x) in [(1.0, 0.3), (2.0, 1.5), (4.0, 0.5)] {
        let k = IntervalKernel::new(a).unwrap();
        let horizon = green_horizon(a, 1e-12);
        let q = integrate(|t| if t <= 0.0 { 0.0 } else { k.exit_density(x, t).unwrap() }, 0.0, horizon, 1e-11).unwrap();
        assert_abs_diff_eq!(q.value, x / a, epsilon = 1e-8);
    }
}

#[test]
fn taboo_stationary_is_invariant() {
    let k = IntervalKernel::new(1.0).unwrap();
    for y in [0.1, 0.35, 0.5, 0.8] {
        let q = integrate(
            |x| if x <= 0.0 || x >= 1.0 { 0.0 } else { k.taboo_stationary(x).unwrap() * k.taboo_density(x, y, 0.5).unwrap() },
            0.0,
            1.0,
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(q.value, k.taboo_stationary(y).unwrap(), epsilon = 1e-8);
    }
}

#[test]
fn one_mode_estimate_holds_on_grid() {
    for a in [1.0, 3.0, 7.5] {
        let k = IntervalKernel::new(a).unwrap();
        for t_unit in [0.3, 0.6, 1.0, 2.0] {
            let t = t_unit * a * a;
            let bound = error_term(t_unit).unwrap();
            for i in 1..20 {
                for j in 1..20 {
                    let (x, y) = (a * f64::from(i) / 20.0, a * f64::from(j) / 20.0);
                    let p = k.renormalized_killed_density(x, y, t).unwrap();
                    let mode = 2.0 / a * (PI * x / a).sin() * (PI * y / a).sin();
                    assert!((p / mode - 1.0).abs() <= bound + 1e-9, "a={a} t={t} x={x} y={y}");
                }
            }
        }
    }
}

#[test]
fn barrier_reaches_fraction_of_shift() {
    for delta_frac in [0.1, 0.01] {
        // Any t0 with θ̄(t0) ≥ 1 - δ works because log(1 + (e^Δ-1)s) ≥ sΔ.
        let mut t0 = 0.01;
        while theta_bar(t0).unwrap() < 1.0 - delta_frac {
            t0 += 0.01;
        }
        for delta in [0.5, 2.0, 10.0, 100.0] {
            for i in 0..200 {
                let t = t0 + f64::from(i) * 0.02;
                let (f, _) = barrier_fn(delta, t).unwrap();
                assert!(f >= (1.0 - delta_frac) * delta, "δ={delta_frac} Δ={delta} t={t}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chapman_kolmogorov(a in 0.5f64..5.0, xf in 0.05f64..0.95, yf in 0.05f64..0.95, t in 0.02f64..2.0, sf in 0.1f64..0.9) {
        let k = IntervalKernel::new(a).unwrap();
        let (x, y) = (xf * a, yf * a);
        let tt = t * a * a;
        let s = sf * tt;
        let q = integrate(|z| k.killed_density(x, z, s).unwrap() * k.killed_density(z, y, tt - s).unwrap(), 0.0, a, 1e-12).unwrap();
        let direct = k.killed_density(x, y, tt).unwrap();
        prop_assert!((q.value - direct).abs() < 1e-9 * (1.0 + direct), "{} vs {}", q.value, direct);
    }

    #[test]
    fn green_function_identity(a in 0.5f64..6.0, xf in 0.02f64..0.98, yf in 0.02f64..0.98) {
        let k = IntervalKernel::new(a).unwrap();
        let (x, y) = (xf * a, yf * a);
        let horizon = green_horizon(a, 1e-9);
        let q = integrate(|t| if t <= 0.0 { 0.0 } else { k.killed_density(x, y, t).unwrap() }, 0.0, horizon, 1e-9).unwrap();
        let green = 2.0 / a * x.min(y) * (a - x.max(y));
        prop_assert!((q.value - green).abs() < 1e-6, "{} vs {}", q.value, green);
    }

    #[test]
    fn martingale_weight_is_reproduced(a in 3.2f64..20.0, xf in 0.02f64..0.98, t in 0.01f64..3.0) {
        let k = IntervalKernel::new(a).unwrap();
        let mu = k.mu().unwrap();
        let w = |y: f64| a * (PI * y / a).sin() * (mu * (y - a)).exp();
        let x = xf * a;
        let tt = t * a * a;
        let q = integrate(|y| k.bbm_weighted_density(x, y, tt).unwrap() * w(y), 0.0, a, 1e-11).unwrap();
        prop_assert!((q.value - w(x)).abs() < 1e-8 * (1.0 + w(x)), "{} vs {}", q.value, w(x));
    }

    #[test]
    fn exit_integral_scaling(a in 0.5f64..8.0, xf in 0.0f64..1.0, yf in 0.0f64..1.0, lo in 0.0f64..1.5, len in 0.05f64..1.0) {
        let k = IntervalKernel::new(a).unwrap();
        let unit = IntervalKernel::new(1.0).unwrap();
        let s_unit = TimeSet::interval(lo, lo + len).unwrap();
        let s = s_unit.scaled(a * a);
        let big = k.exit_integrals(xf * a, &s, Some(yf * a)).unwrap();
        let small = unit.exit_integrals(xf, &s_unit, Some(yf)).unwrap();
        prop_assert!((big.i - small.i).abs() < 1e-10 * (1.0 + small.i.abs()), "I: {} vs {}", big.i, small.i);
        let (bj, sj) = (big.j.unwrap(), small.j.unwrap());
        prop_assert!((bj - a * sj).abs() < 1e-10 * (1.0 + bj.abs()), "J: {} vs {}", bj, a * sj);
    }

    #[test]
    fn exit_integral_bound(xf in 0.01f64..0.99, lo in 0.2f64..3.0, len in 0.1f64..2.0) {
        let unit = IntervalKernel::new(1.0).unwrap();
        let s = TimeSet::interval(lo, lo + len).unwrap();
        let i = unit.exit_integrals(xf, &s, None).unwrap().i;
        let main = PI * len * (PI * xf).sin();
        let bound = (4.0 / PI).min(PI * len) * error_term(lo).unwrap() * (PI * xf).sin();
        prop_assert!((i - main).abs() <= bound + 1e-10, "I={i} main={main} bound={bound}");
    }

    #[test]
    fn theta_bar_in_unit_interval(t in 0.0f64..20.0) {
        let v = theta_bar(t).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }
}
