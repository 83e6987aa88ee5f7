use std::f64::consts::PI;

use bbm_lab::absorbed::ReproductionLaw;
use bbm_lab::quad::integrate;
use bbm_lab::seed::rng_from_seed;
use bbm_lab::selection::*;
use bbm_lab::stats::{chi_square, ks_critical_two_sample, ks_two_sample, mean_se, variance};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal};

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Speed without selection from the stationarity condition `θΛ'(θ) = Λ(θ)`.
fn free_speed_oracle(b: f64, p: f64) -> f64 {
    let lam = |t: f64| ((1.0 + b) * (1.0 - p + p * t.exp())).ln();
    let dlam = |t: f64| p * t.exp() / (1.0 - p + p * t.exp());
    let theta = bisect(1e-6, 20.0, |t| t * dlam(t) - lam(t));
    dlam(theta)
}

/// N-BBM that moves every particle at every branching event.
fn naive_nbbm_median(n: usize, horizon: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut xs = vec![0.0f64; n];
    let mut t = 0.0;
    loop {
        let dt: f64 = Exp::new(0.5 * xs.len() as f64).unwrap().sample(&mut rng);
        let dt = dt.min(horizon - t);
        for x in xs.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += dt.sqrt() * z;
        }
        t += dt;
        if t >= horizon {
            break;
        }
        let i = rng.random_range(0..xs.len());
        xs.push(xs[i]);
        let (lowest, _) = xs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        xs.swap_remove(lowest);
    }
    xs.sort_by(f64::total_cmp);
    xs[n - n / 2]
}

#[test]
fn x_alpha_matches_bisection() {
    let oracle = bisect(0.0, 10.0, |x| (1.0 + x) * (-x).exp() - 0.5);
    let x = x_alpha(0.5).unwrap();
    assert!((x - oracle).abs() < 1e-12);
    assert!((x - 1.67835).abs() < 1e-5);
}

#[test]
fn median_of_distinct_atoms_at_rank_one() {
    let front = FrontState::from_positions(0.0, vec![0.3, -2.0, 5.5, 1.25]);
    assert_eq!(median_alpha(&front, 0.25, 4.0).unwrap(), 5.5);
}

#[test]
fn initial_sampler_moments_and_acceptance() {
    let a = a_n(1e4).unwrap();
    let dens = |x: f64| (PI * x / a).sin() * (-x).exp();
    let z = integrate(dens, 0.0, a, 1e-13).unwrap().value;
    let mean = integrate(|x| x * dens(x), 0.0, a, 1e-13).unwrap().value / z;
    let accept = z / -(-a).exp_m1();
    let n = 1_000_000;
    let (xs, proposals) = sample_initial_counted(n, a, &mut rng_from_seed(8)).unwrap();
    let (m, se) = mean_se(&xs);
    assert!((m - mean).abs() < 3.0 * se, "{m} vs {mean} ± {se}");
    let rate = n as f64 / proposals as f64;
    let rate_se = (rate * (1.0 - rate) / proposals as f64).sqrt();
    assert!((rate - accept).abs() < 3.0 * rate_se, "{rate} vs {accept}");
}

#[test]
fn single_particle_nbbm_is_brownian() {
    let t = 2.0;
    let reps = 10_000;
    let ends: Vec<f64> = (0..reps)
        .map(|s| {
            let cfg = NbbmConfig { initial: Initial::Origin, ..NbbmConfig::new(1, t, t) };
            nbbm_run(&cfg, s).unwrap().med_alpha[1]
        })
        .collect();
    let v = variance(&ends);
    // Var of the sample variance of a Gaussian is 2σ⁴/(n-1).
    let se = (2.0 * t * t / (reps as f64 - 1.0)).sqrt();
    assert!((v - t).abs() < 3.0 * se, "variance {v}, se {se}");
}

#[test]
fn births_only_keep_population_at_n() {
    let law = ReproductionLaw::new(vec![0.0, 0.0, 0.5, 0.5]).unwrap();
    let cfg = NbbmConfig { law, initial: Initial::Origin, ..NbbmConfig::new(300, 20.0, 0.5) };
    let trace = nbbm_run(&cfg, 2).unwrap();
    assert!(trace.totals.iter().all(|t| *t == 300.0));
}

#[test]
fn lazy_nbbm_matches_naive_engine() {
    let (n, horizon, reps) = (50, 10.0, 1500);
    let naive: Vec<f64> = (0..reps).map(|s| naive_nbbm_median(n, horizon, 10_000 + s)).collect();
    let lazy: Vec<f64> = (0..reps)
        .map(|s| {
            let cfg = NbbmConfig { initial: Initial::Origin, ..NbbmConfig::new(n, horizon, horizon) };
            *nbbm_run(&cfg, s).unwrap().med_alpha.last().unwrap()
        })
        .collect();
    let d = ks_two_sample(&naive, &lazy).unwrap();
    assert!(d < ks_critical_two_sample(reps as usize, reps as usize, 0.01), "KS distance {d}");
}

#[test]
fn nbbm_trace_is_reproducible() {
    let cfg = NbbmConfig::new(500, 10.0, 0.5);
    let a = serde_json::to_string(&nbbm_run(&cfg, 21).unwrap()).unwrap();
    let b = serde_json::to_string(&nbbm_run(&cfg, 21).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn nbbm_increments_are_right_skewed() {
    let horizon = 2000.0;
    let trace = nbbm_run(&NbbmConfig::new(1000, horizon, 1.0), 3).unwrap();
    let c = front_cumulants(&trace.after(200.0), 1.0).unwrap();
    assert!(c.k[2] > 2.0 * c.se[2], "k3 = {} ± {}", c.k[2], c.se[2]);
}

#[test]
fn free_speed_matches_stationarity_oracle() {
    for (b, p) in [(0.05, 0.25), (0.3, 0.5), (0.01, 0.9)] {
        let v = BrwParams::new(b, p).unwrap().free_speed().unwrap();
        assert!((v - free_speed_oracle(b, p)).abs() < 1e-9, "b={b} p={p}");
    }
}

#[test]
fn single_particle_walk_speed() {
    let steps = 200_000u64;
    let trace = nbrw_run(&NbrwConfig::new(1.0, steps), 4).unwrap();
    let v = trace.med_alpha.last().unwrap() / steps as f64;
    let exact = 0.95 * 0.25 + 0.05 * (1.0 - 0.75 * 0.75);
    let se = (exact * (1.0 - exact) / steps as f64).sqrt();
    assert!((v - exact).abs() < 3.0 * se, "{v} vs {exact}");
}

#[test]
fn walk_totals_stay_at_n() {
    let cfg = NbrwConfig::new(1000.0, 500);
    let trace = nbrw_run(&cfg, 6).unwrap();
    let first = trace.totals.iter().position(|t| *t == 1000.0).unwrap();
    assert!(trace.totals[first..].iter().all(|t| *t == 1000.0));
}

#[test]
fn huge_populations_are_slower_than_free_walk() {
    let vstar = BrwParams::reference().free_speed().unwrap();
    let speeds: Vec<f64> = [1e10, 1e20, 1e30]
        .iter()
        .map(|&n| {
            let cfg = NbrwConfig { sample_every: 10, ..NbrwConfig::new(n, 20_000) };
            let trace = nbrw_run(&cfg, 5).unwrap();
            assert!(trace.approximate);
            trace.speed().unwrap().slope
        })
        .collect();
    assert!(speeds.windows(2).all(|w| w[0] < w[1]), "{speeds:?}");
    assert!(speeds.iter().all(|v| *v < vstar));
}

#[test]
fn exact_and_site_modes_agree_under_coupled_draws() {
    for n in [1.0, 37.0, 2000.0] {
        let mut exact = Nbrw::new(BrwParams::reference(), n, BrwMode::Exact, 10_000).unwrap();
        let mut sites = Nbrw::new(BrwParams::reference(), n, BrwMode::Sites(CountSampler::Bernoulli), 10_000).unwrap();
        let (mut r1, mut r2) = (rng_from_seed(12), rng_from_seed(12));
        for _ in 0..150 {
            exact.advance(&mut r1).unwrap();
            sites.advance(&mut r2).unwrap();
            assert_eq!(exact.histogram(), sites.histogram());
        }
    }
}

#[test]
fn hybrid_sampler_is_exact_below_threshold() {
    let (n, p, draws) = (20u64, 0.3, 100_000);
    let sampler = CountSampler::default();
    let mut rng = rng_from_seed(13);
    let mut approx = false;
    let mut observed = vec![0.0; n as usize + 1];
    for _ in 0..draws {
        observed[sampler.binomial(n as f64, p, &mut rng, &mut approx) as usize] += 1.0;
    }
    assert!(!approx);
    let pmf = statrs::distribution::Binomial::new(p, n).unwrap();
    // Pool the sparse tails so every cell expects at least 5.
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for k in 0..=n {
        o_acc += observed[k as usize];
        e_acc += pmf.pmf(k) * f64::from(draws);
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            (o_acc, e_acc) = (0.0, 0.0);
        }
    }
    *obs.last_mut().unwrap() += o_acc;
    *exp.last_mut().unwrap() += e_acc;
    let stat = chi_square(&obs, &exp);
    let crit = ChiSquared::new((obs.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < crit, "chi-square {stat} > {crit}");
}

/// Mean and variance of `round(μ + σZ)` by summing over the integer lattice.
fn rounded_gaussian_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let normal = Normal::new(mu, sigma).unwrap();
    let lo = (mu - 12.0 * sigma).floor() as i64;
    let hi = (mu + 12.0 * sigma).ceil() as i64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in lo..=hi {
        let kf = k as f64;
        let w = normal.cdf(kf + 0.5) - normal.cdf(kf - 0.5);
        let d = kf - mu;
        m1 += w * d;
        m2 += w * d * d;
    }
    (mu + m1, m2 - m1 * m1)
}

#[test]
fn hybrid_sampler_moments_above_threshold() {
    let p = 0.25;
    for n in [2e6, 1e8, 1e10] {
        let (mean, var) = rounded_gaussian_moments(n * p, (n * p * (1.0 - p)).sqrt());
        assert!((mean / (n * p) - 1.0).abs() < 1e-6, "mean at n={n}");
        assert!((var / (n * p * (1.0 - p)) - 1.0).abs() < 1e-6, "variance at n={n}");
    }
    let mut rng = rng_from_seed(14);
    let mut approx = false;
    let n = 1e9;
    let draws: Vec<f64> = (0..50_000).map(|_| CountSampler::default().binomial(n, p, &mut rng, &mut approx)).collect();
    assert!(approx);
    assert!(draws.iter().all(|x| x.fract() == 0.0 && *x >= 0.0 && *x <= n));
    let (m, se) = mean_se(&draws);
    assert!((m - n * p).abs() < 4.0 * se);
}

#[test]
fn cutoff_speed_increases_towards_free_speed() {
    let params = BrwParams::reference();
    let vstar = params.free_speed().unwrap();
    let speeds: Vec<f64> =
        [1e5, 1e10, 1e20, 1e40].iter().map(|&n| cutoff_front_speed(params, n, CutoffOptions::default()).unwrap()).collect();
    assert!(speeds.windows(2).all(|w| w[0] <= w[1]), "{speeds:?}");
    let far = cutoff_front_speed(params, 1e200, CutoffOptions::default()).unwrap();
    assert!(far < vstar && vstar - far < 1e-4, "{far} vs {vstar}");
}

#[test]
fn gaussian_increment_cumulants() {
    let sigma = 0.7;
    let mut rng = rng_from_seed(15);
    let mut x = 0.0;
    let mut values = vec![0.0];
    for _ in 0..4000 {
        let z: f64 = StandardNormal.sample(&mut rng);
        x += sigma * z;
        values.push(x);
    }
    let t = trace_from(values);
    let c = front_cumulants(&t, 1.0).unwrap();
    assert!((c.k[1] / (sigma * sigma) - 1.0).abs() < 3.0 * c.se[1] / (sigma * sigma));
    assert!(c.k[2].abs() < 3.0 * c.se[2]);
    assert!(c.k[3].abs() < 3.0 * c.se[3]);
}

fn trace_from(values: Vec<f64>) -> FrontTrace {
    FrontTrace {
        sample_times: (0..values.len()).map(|i| i as f64).collect(),
        totals: vec![1.0; values.len()],
        med_alpha: values,
        recenter_rate: 0.0,
        approximate: false,
    }
}

#[test]
fn coupling_dominance_holds_for_all_policies() {
    let law = ReproductionLaw::binary();
    let horizon = CouplingHorizon { max_time: f64::INFINITY, max_events: 10 };
    let policies = [PlusPolicy::ExactN, PlusPolicy::Delayed { slack: 2 }, PlusPolicy::Lazy { kill_prob: 0.4 }];
    for seed in 0..1500u64 {
        let n = 1 + (seed % 5) as usize;
        let policy = policies[(seed % 3) as usize];
        let out = coupled_ordering_run(&law, n, horizon, seed, policy, 0.3).unwrap();
        assert!(out.dominance_ok, "seed {seed}");
        for pair in [&out.plus, &out.minus] {
            for (low, up) in pair.lower.iter().zip(&pair.upper) {
                assert!(dominated_brute_force(low, up), "seed {seed}: {low:?} vs {up:?}");
                assert!(dominated_sorted(low, up));
            }
        }
    }
}

#[test]
fn lazy_policy_rewires() {
    let law = ReproductionLaw::binary();
    let horizon = CouplingHorizon { max_time: f64::INFINITY, max_events: 30 };
    let rewired: u64 = (0..200)
        .map(|s| coupled_ordering_run(&law, 4, horizon, s, PlusPolicy::Lazy { kill_prob: 0.5 }, 0.0).unwrap().plus.rewirings)
        .sum();
    assert!(rewired > 0);
}

fn multiset_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 1..7), prop::collection::vec(-5.0f64..5.0, 0..3)).prop_map(
        |(pairs, extra)| {
            let lower: Vec<f64> = pairs.iter().map(|(x, _)| *x).collect();
            let mut upper: Vec<f64> = pairs.iter().map(|(x, d)| x + d).collect();
            upper.extend(extra);
            (lower, upper)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn median_is_monotone_in_stochastic_order((lower, upper) in multiset_pair(), alpha in 0.05f64..1.0) {
        prop_assert!(dominated_brute_force(&lower, &upper));
        let n = upper.len() as f64;
        let a = median_alpha(&FrontState::from_positions(0.0, lower), alpha, n).unwrap();
        let b = median_alpha(&FrontState::from_positions(0.0, upper), alpha, n).unwrap();
        prop_assert!(a <= b, "{a} > {b}");
    }

    #[test]
    fn brute_force_and_sorted_orders_agree(a in prop::collection::vec(-3.0f64..3.0, 0..6), b in prop::collection::vec(-3.0f64..3.0, 0..6)) {
        prop_assert_eq!(dominated_brute_force(&a, &b), dominated_sorted(&a, &b));
    }

    #[test]
    fn drift_only_moves_first_cumulant(slope in -2.0f64..2.0, seed in 0u64..1000) {
        let mut rng = rng_from_seed(seed);
        let values: Vec<f64> = (0..200).scan(0.0, |x, _| { *x += rng.random::<f64>(); Some(*x) }).collect();
        let tilted: Vec<f64> = values.iter().enumerate().map(|(i, v)| v + slope * i as f64).collect();
        let a = front_cumulants(&trace_from(values), 2.0).unwrap();
        let b = front_cumulants(&trace_from(tilted), 2.0).unwrap();
        prop_assert!((b.k[0] - a.k[0] - 2.0 * slope).abs() < 1e-9);
        for j in 1..4 {
            prop_assert!((a.k[j] - b.k[j]).abs() < 1e-9 * (1.0 + a.k[j].abs()));
        }
    }
}
