use bbm_lab::seed::derive_seed;
use bbm_lab::stable_pp::*;
use bbm_lab::stats::{ks_coefficient, ks_one_sample, mean_se};
use proptest::prelude::*;

const WINDOW: (f64, f64) = (-3.0, 20.0);

fn draws(dec: &DecorationSpec, n: u64, master: u64) -> Vec<PointConfiguration> {
    (0..n).map(|i| sample_dppp(dec, WINDOW, derive_seed(master, i)).unwrap()).collect()
}

fn counts(samples: &[PointConfiguration], a: f64, b: f64) -> (f64, f64) {
    mean_se(&samples.iter().map(|s| s.count_in(a, b) as f64).collect::<Vec<_>>())
}

fn e(x: f64) -> f64 {
    x.exp()
}

#[test]
fn plain_counts_follow_the_intensity() {
    let s = draws(&DecorationSpec::plain(), 50_000, 1);
    let (m, se) = counts(&s, 0.0, 20.0);
    assert!((m - (1.0 - e(-20.0))).abs() < 3.0 * se, "{m}");
    let (m, se) = counts(&s, -1.0, 0.5);
    assert!((m - (e(1.0) - e(-0.5))).abs() < 3.0 * se, "{m}");
}

#[test]
fn two_atom_decoration_count() {
    let s = draws(&DecorationSpec::fixed(vec![0.0, -1.0]), 50_000, 2);
    let (m, se) = counts(&s, 0.0, 20.0);
    // E Z([0, ∞)) = ∫ E D([0, ∞) - y) e^{-y} dy = 1 + e^{-1}.
    assert!((m - (1.0 + e(-1.0))).abs() < 3.0 * se, "{m}");
    assert!((1.0 + e(-1.0) - 1.367_88).abs() < 1e-5);
}

/// `E[⌊e^{2Y}⌋ e^{-Y}]` for `Y ~ Exp(1)` conditioned on `[0, cap]`: the
/// multiplicity equals `k` on `[log(k)/2, log(k+1)/2)`.
fn compensated_weight(cap: f64) -> f64 {
    let top = (2.0 * cap).exp().floor() as u64;
    let mut sum = 0.0;
    for k in 1..top {
        sum += 0.5 / (k + 1) as f64;
    }
    sum += 0.5 * top as f64 * (1.0 / top as f64 - e(-2.0 * cap));
    sum / (1.0 - e(-cap))
}

#[test]
fn compensated_decoration_intensity_grows_with_cap() {
    let mut last = 0.0;
    for cap in [1.0, 2.0, 4.0] {
        let dec = DecorationSpec { decoration: Decoration::Compensated { cap }, normalized: true };
        let s = draws(&dec, 20_000, 3);
        let (m, se) = counts(&s, 0.0, 1.0);
        let level = 1.0 + compensated_weight(cap);
        assert!((m - level * (1.0 - e(-1.0))).abs() < 3.0 * se, "cap {cap}: {m}");
        assert!(m > last);
        last = m;
    }
}

#[test]
fn plain_cumulant_closed_form() {
    let s = draws(&DecorationSpec::plain(), 100_000, 4);
    for lambda in [0.5, 1.0, 3.0] {
        let f = TestFunction::Step { lo: 0.0, hi: 1.0, height: lambda };
        let k = empirical_cumulant(&s, &f).unwrap();
        let exact = (1.0 - e(-lambda)) * (1.0 - e(-1.0));
        assert!((k.value - exact).abs() < 3.0 * k.se, "λ = {lambda}: {} vs {exact}", k.value);
    }
}

#[test]
fn plain_shift_law() {
    let s = draws(&DecorationSpec::plain(), 100_000, 5);
    let t = exp_shift_test(&s, &TestFunction::indicator(0.0, 1.0), 0.5).unwrap();
    let k = (1.0 - e(-1.0)).powi(2);
    assert!((k - 0.399_58).abs() < 1e-5);
    assert!(t.z.abs() < 3.0, "{t:?}");
    assert!((t.lhs / (e(0.5) * k) - 1.0).abs() < 0.02);
}

#[test]
fn decorated_shift_law() {
    let s = draws(&DecorationSpec::fixed(vec![0.0, -0.4]), 100_000, 6);
    let f = TestFunction::Tent { lo: -1.0, hi: 1.5, height: 0.8 };
    for x in [0.3, 0.7] {
        let t = exp_shift_test(&s, &f, x).unwrap();
        assert!(t.z.abs() < 3.0, "x = {x}: {t:?}");
    }
}

#[test]
fn superposed_plain_processes_keep_the_intensity() {
    let (alpha, beta) = (0.3f64.ln(), 0.7f64.ln());
    let a = draws(&DecorationSpec::plain(), 30_000, 7);
    let b = draws(&DecorationSpec::plain(), 30_000, 8);
    let sup: Vec<_> = a.iter().zip(&b).map(|(x, y)| superpose(x, y, alpha, beta).unwrap()).collect();
    for lo in [-2.0, -1.0, 0.0, 1.0] {
        let (m, se) = counts(&sup, lo, lo + 1.0);
        let exact = e(-lo) - e(-lo - 1.0);
        assert!((m - exact).abs() < 3.0 * se, "bin {lo}: {m} vs {exact}");
    }
}

#[test]
fn superposition_preserves_cumulants() {
    let dec = DecorationSpec { decoration: Decoration::Cluster { mean_extra: 1.5, spread: 1.0 }, normalized: true };
    let (alpha, beta) = (0.4f64.ln(), 0.6f64.ln());
    let z = draws(&dec, 40_000, 9);
    let z1 = draws(&dec, 40_000, 10);
    let z2 = draws(&dec, 40_000, 11);
    let sup: Vec<_> = z1.iter().zip(&z2).map(|(x, y)| superpose(x, y, alpha, beta).unwrap()).collect();
    let fs = [
        TestFunction::indicator(0.0, 1.0),
        TestFunction::Tent { lo: -1.0, hi: 2.0, height: 0.5 },
        TestFunction::Step { lo: 1.0, hi: 3.0, height: 2.0 },
    ];
    for f in &fs {
        let z = cumulant_two_sample(&z, &sup, f).unwrap();
        assert!(z.abs() < 3.0, "{f:?}: z = {z}");
    }
}

#[test]
fn plain_rightmost_is_gumbel() {
    let s = draws(&DecorationSpec::plain(), 20_000, 12);
    let m: Vec<f64> = s.iter().map(|c| rightmost(c).unwrap()).collect();
    let d = ks_one_sample(&m, |x| (-(-x).exp()).exp()).unwrap();
    assert!(d < ks_coefficient(0.01) / (m.len() as f64).sqrt(), "KS {d}");
}

#[test]
fn intensity_profiles_have_unit_slope() {
    let edges: Vec<f64> = (0..=8).map(|i| -2.0 + 0.5 * f64::from(i)).collect();
    let plain = intensity_profile(&draws(&DecorationSpec::plain(), 20_000, 13), &edges).unwrap();
    assert!((plain.fit.slope + 1.0).abs() < 3.0 * plain.fit.slope_se, "{:?}", plain.fit);
    let dec = intensity_profile(&draws(&DecorationSpec::fixed(vec![0.0, -1.0]), 20_000, 14), &edges).unwrap();
    assert!((dec.fit.slope + 1.0).abs() < 3.0 * dec.fit.slope_se, "{:?}", dec.fit);
    for j in 0..plain.means.len() {
        let r = dec.means[j] / plain.means[j];
        let se = r * (dec.ses[j] / dec.means[j]).hypot(plain.ses[j] / plain.means[j]);
        assert!((r - (1.0 + e(-1.0))).abs() < 3.0 * se, "bin {j}: level ratio {r}");
    }
}

#[test]
fn too_few_samples_for_a_profile() {
    let s = draws(&DecorationSpec::plain(), 10, 15);
    assert!(intensity_profile(&s, &[0.0, 1.0, 2.0]).is_err());
}

#[test]
fn sampling_is_deterministic() {
    let dec = DecorationSpec { decoration: Decoration::Cluster { mean_extra: 2.0, spread: 0.5 }, normalized: true };
    let a = serde_json::to_string(&draws(&dec, 50, 16)).unwrap();
    let b = serde_json::to_string(&draws(&dec, 50, 16)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cumulant_is_monotone_in_f(h1 in 0.0f64..3.0, dh in 0.0f64..3.0, seed in 0u64..1000) {
        let s: Vec<_> = (0..200).map(|i| sample_dppp(&DecorationSpec::plain(), WINDOW, derive_seed(seed, i)).unwrap()).collect();
        let f = TestFunction::Tent { lo: -1.0, hi: 2.0, height: h1 };
        let k1 = empirical_cumulant(&s, &f).unwrap().value;
        let k2 = empirical_cumulant(&s, &f.scaled(1.0 + dh / h1.max(1e-9))).unwrap().value;
        prop_assert!(k1 <= k2 + 1e-12);
    }

    #[test]
    fn rightmost_is_translation_covariant(atoms in prop::collection::vec(-5.0f64..5.0, 1..10), c in -4.0f64..4.0) {
        let z = PointConfiguration::new(atoms, (-20.0, 20.0)).unwrap();
        prop_assert_eq!(rightmost(&z.translate(c)).unwrap(), rightmost(&z).unwrap() + c);
    }

    #[test]
    fn normalized_samples_stay_inside(spread in 0.0f64..3.0, seed in 0u64..1000) {
        let dec = DecorationSpec { decoration: Decoration::Cluster { mean_extra: 1.0, spread }, normalized: true };
        let z = sample_dppp(&dec, (-1.0, 4.0), seed).unwrap();
        prop_assert!(z.atoms().iter().all(|x| (-1.0..=4.0).contains(x)));
    }
}
