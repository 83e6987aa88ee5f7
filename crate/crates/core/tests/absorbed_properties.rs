use bbm_lab::absorbed::*;
use bbm_lab::seed::replica_rng;
use bbm_lab::stats::mean_se;

fn counts(law: &ReproductionLaw, d: Dynamics, y: f64, n: usize, seed: u64) -> Vec<f64> {
    absorbed_counts(law, d, y, n, seed, Caps::default()).unwrap().completed.iter().map(|n| *n as f64).collect()
}

#[test]
fn supercritical_mean_matches_many_to_one() {
    let law = ReproductionLaw::binary();
    let d = Dynamics { branch_rate: 0.5, drift: 1.5, sigma: 1.0 };
    let v = counts(&law, d, 2.0, 100_000, 11);
    let (m, se) = mean_se(&v);
    let lambda = 1.5 - (1.5f64 * 1.5 - 1.0).sqrt();
    assert!((m - (lambda * 2.0).exp()).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn normalization_covariance() {
    // (β, c, σ) at distance x has the law of (1, c/(σ√β), 1) at distance x√β/σ.
    let law = ReproductionLaw::binary();
    let (beta, c, sigma, x) = (2.0f64, 1.5, 0.5, 1.0);
    let general = Dynamics { branch_rate: beta, drift: c, sigma };
    let unit = Dynamics { branch_rate: 1.0, drift: c / (sigma * beta.sqrt()), sigma: 1.0 };
    let a = counts(&law, general, x, 60_000, 1);
    let b = counts(&law, unit, x * beta.sqrt() / sigma, 60_000, 2);
    let (ma, sa) = mean_se(&a);
    let (mb, sb) = mean_se(&b);
    assert!((ma - mb).abs() < 3.5 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
    let c0 = sigma * (2.0 * beta * law.m()).sqrt();
    let lambda = (c - (c * c - c0 * c0).sqrt()) / (sigma * sigma);
    assert!((ma - (lambda * x).exp()).abs() < 3.5 * sa);
    for k in [1.0, 2.0, 4.0] {
        let pa = a.iter().filter(|v| **v <= k).count() as f64 / a.len() as f64;
        let pb = b.iter().filter(|v| **v <= k).count() as f64 / b.len() as f64;
        let se = (pa * (1.0 - pa) / a.len() as f64 + pb * (1.0 - pb) / b.len() as f64).sqrt();
        assert!((pa - pb).abs() < 3.5 * se, "P(N <= {k}): {pa} vs {pb}");
    }
}

#[test]
fn product_martingale_identity_holds() {
    let law = ReproductionLaw::binary();
    let res = laplace_duality_check(&law, 3.0, &[-1.0, 0.0, 1.5], 30_000, 8, Caps::default()).unwrap();
    assert!(res.wave_residual < 1e-8);
    assert!(res.product_martingale_max_z < 3.5, "{res:?}");
}

#[test]
fn laplace_transform_limits() {
    let law = ReproductionLaw::binary();
    let res = laplace_duality_check(&law, 4.0, &[-40.0, 100.0], 2_000, 9, Caps::default()).unwrap();
    let (left, right) = (res.points[0], res.points[1]);
    assert!((left.monte_carlo - 1.0).abs() < 1e-12 && (left.wave - 1.0).abs() < 1e-12);
    assert!(right.monte_carlo < 1e-12 && right.wave < 1e-12);
}

#[test]
fn wave_left_tail_constant_is_one_asymptotically() {
    let w = travelling_wave(&ReproductionLaw::binary(), 1.0, WaveGrid::default()).unwrap();
    for x in [45.0, 50.0, 55.0, 60.0] {
        let ratio = w.one_minus_psi(-x) / (x * (-x as f64).exp());
        assert!((0.95..=1.05).contains(&ratio), "x={x}: {ratio}");
        // Subleading term is a constant shift of |z|.
        assert!((x * (ratio - 1.0) - w.left_b).abs() < 1e-4);
    }
}

#[test]
fn semigroup_at_half_depths() {
    let law = ReproductionLaw::binary();
    let pts = gw_semigroup_check(&law, 0.5, 0.5, &[0.5], 20_000, 21, Caps::default()).unwrap();
    let p = pts[0];
    assert!(p.discrepancy < 3.0 * (p.direct_se.powi(2) + p.composed_se.powi(2)).sqrt(), "{p:?}");
}

#[test]
fn zero_offspring_probability_law_never_goes_extinct() {
    let law = ReproductionLaw::new(vec![0.0, 0.0, 0.6, 0.4]).unwrap();
    let v = counts(&law, Dynamics::critical_line(&law), 1.0, 500, 3);
    assert!(v.iter().all(|n| *n >= 1.0));
}

#[test]
fn truncated_mean_of_w_grows_with_cap() {
    let law = ReproductionLaw::binary();
    let tail = w_tail_experiment(&law, 5.0, 20_000, 4, TailOptions { bootstrap: 20, ..TailOptions::w_default() }).unwrap();
    assert!(tail.table.windows(2).all(|p| p[1].truncated_mean >= p[0].truncated_mean));
    assert!(tail.truncated_mean_slope > 0.0);
    assert!(tail.fit.slope < 0.0);
}

#[test]
fn runs_are_bit_identical() {
    let law = ReproductionLaw::binary();
    let caps = Caps { record_times: true, ..Caps::default() };
    for i in 0..20 {
        let a = simulate_with(&law, Dynamics::critical_line(&law), 3.0, &mut replica_rng(5, i), caps).unwrap();
        let b = simulate_with(&law, Dynamics::critical_line(&law), 3.0, &mut replica_rng(5, i), caps).unwrap();
        assert_eq!(a, b);
    }
}
