//! Mixture operations checked against independent computations: exhaustive
//! enumeration, numerical quadrature and closed forms.

use credit_mixture::classifiers::{MixingSample, ModelTag};
use credit_mixture::mixture::{
    beta_binomial_pmf, beta_fit_moments, beta_moment, beta_moments, count_pmf_from_moments, default_correlation,
    empirical_count_pmf, kl_divergence, loss_fraction, sample_moments, var_alpha, BetaParams, CountDistribution,
    DistributionSource,
};
use credit_mixture::pipeline::export_pmf;
use proptest::prelude::*;

fn sample(q: Vec<f64>) -> MixingSample {
    MixingSample::new(q, ModelTag::Lr).unwrap()
}

/// `P(S = k)` by summing over all `2^d` default vectors for each atom.
fn enumerate_pmf(q: &[f64], d: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; d + 1];
    for &qi in q {
        for mask in 0u32..(1 << d) {
            let k = mask.count_ones() as usize;
            let mut prob = 1.0;
            for j in 0..d {
                prob *= if mask >> j & 1 == 1 { qi } else { 1.0 - qi };
            }
            pmf[k] += prob / q.len() as f64;
        }
    }
    pmf
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64) -> f64 {
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    simpson(f, 0.0, 1.0, fa, fm, fb, whole, 1e-15, 40)
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_pmf_matches_enumeration(
        q in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], 1..12),
        d in 1usize..=10,
    ) {
        let got = empirical_count_pmf(&sample(q.clone()), d).unwrap();
        for (g, w) in got.pmf().iter().zip(enumerate_pmf(&q, d)) {
            prop_assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn moment_route_matches_empirical(q in prop::collection::vec(0.0..=1.0f64, 1..200), d in 1usize..=25) {
        let s = sample(q);
        let direct = empirical_count_pmf(&s, d).unwrap();
        let alt = count_pmf_from_moments(&sample_moments(&s, d).unwrap(), d).unwrap();
        for (a, b) in alt.pmf().iter().zip(direct.pmf()) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn beta_plug_in_matches_beta_binomial(a in 0.2..8.0f64, b in 0.2..8.0f64, d in 1usize..=25) {
        let p = BetaParams::new(a, b).unwrap();
        let alt = count_pmf_from_moments(&beta_moments(&p, d), d).unwrap();
        let bb = beta_binomial_pmf(&p, d).unwrap();
        for (x, y) in alt.pmf().iter().zip(bb.pmf()) {
            prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        for k in 1..=d {
            let single = beta_moment(&p, k);
            prop_assert!((single - beta_moments(&p, d).get(k)).abs() <= 1e-14 * single);
        }
    }

    #[test]
    fn mean_and_variance_identities(q in prop::collection::vec(0.0..=1.0f64, 1..100), d in 1usize..=300) {
        let s = sample(q);
        let m = sample_moments(&s, 2).unwrap();
        let (p, pi2) = (m.p(), m.get(2));
        let np = empirical_count_pmf(&s, d).unwrap();
        let df = d as f64;
        prop_assert!((np.mean() - df * p).abs() < 1e-8);
        let var = df * p * (1.0 - p) + df * (df - 1.0) * (pi2 - p * p);
        prop_assert!((np.variance() - var).abs() < 1e-6 * df * df);
        if let Ok(beta) = beta_fit_moments(p, pi2) {
            let bb = beta_binomial_pmf(&beta, d).unwrap();
            prop_assert!((bb.mean() - df * p).abs() < 1e-8);
        }
    }

    #[test]
    fn moments_are_monotone(q in prop::collection::vec(0.0..=1.0f64, 1..100), order in 1usize..40) {
        let m = sample_moments(&sample(q), order).unwrap();
        for k in 1..order {
            prop_assert!(m.get(k + 1) <= m.get(k));
        }
    }

    #[test]
    fn beta_fit_inverts_parameters(a in 0.05..50.0f64, b in 0.05..50.0f64) {
        let p = BetaParams::new(a, b).unwrap();
        let fit = beta_fit_moments(p.p(), beta_moment(&p, 2)).unwrap();
        prop_assert!((fit.p() - p.p()).abs() < 1e-12);
        prop_assert!((fit.rho() - p.rho()).abs() < 1e-12);
        let back = BetaParams::from_mean_correlation(p.p(), p.rho()).unwrap();
        prop_assert!((back.p() - p.p()).abs() < 1e-12 && (back.rho() - p.rho()).abs() < 1e-12);
    }

    #[test]
    fn var_monotone_in_alpha_and_d(a in 0.3..5.0f64, b in 0.3..10.0f64, d in 1usize..200, alpha in 0.01..0.98f64) {
        let p = BetaParams::new(a, b).unwrap();
        let small = beta_binomial_pmf(&p, d).unwrap();
        let large = beta_binomial_pmf(&p, d + 1).unwrap();
        prop_assert!(var_alpha(&small, alpha).unwrap() <= var_alpha(&small, alpha + 0.01).unwrap());
        prop_assert!(var_alpha(&small, alpha).unwrap() <= var_alpha(&large, alpha).unwrap());
    }

    #[test]
    fn pmfs_are_valid_and_kl_nonnegative(q in prop::collection::vec(0.01..0.99f64, 2..60), d in 1usize..40) {
        let s = sample(q);
        let np = empirical_count_pmf(&s, d).unwrap();
        prop_assert!((np.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(np.pmf().iter().all(|&v| v >= 0.0));
        let m = sample_moments(&s, 2).unwrap();
        if let Ok(beta) = beta_fit_moments(m.p(), m.get(2)) {
            let bb = beta_binomial_pmf(&beta, d).unwrap();
            prop_assert!(kl_divergence(&np, &bb).unwrap() >= 0.0);
        }
    }

    #[test]
    fn loss_fraction_rescales(a in 0.3..5.0f64, b in 0.3..10.0f64, d in 1usize..100, alpha in 0.01..0.99f64) {
        let dist = beta_binomial_pmf(&BetaParams::new(a, b).unwrap(), d).unwrap();
        let loss = loss_fraction(&dist);
        prop_assert!((loss.mean() - dist.mean() / d as f64).abs() < 1e-12);
        prop_assert_eq!(loss.var_alpha(alpha).unwrap(), var_alpha(&dist, alpha).unwrap() as f64 / d as f64);
        prop_assert_eq!(loss.pmf(), dist.pmf());
    }
}

#[test]
fn beta_binomial_matches_quadrature() {
    for &(a, b) in &[(1.0, 1.0), (2.42, 6.78), (1.5, 3.2), (4.0, 1.3), (2.0, 2.0)] {
        let norm = integrate(&|x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0));
        for d in [1usize, 5, 25] {
            let pmf = beta_binomial_pmf(&BetaParams::new(a, b).unwrap(), d).unwrap();
            for k in 0..=d {
                let c = choose(d, k);
                let want = integrate(&|x: f64| {
                    c * x.powi(k as i32) * (1.0 - x).powi((d - k) as i32) * x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
                }) / norm;
                assert!((pmf.pmf()[k] - want).abs() < 1e-9, "a={a} b={b} d={d} k={k}: {} vs {want}", pmf.pmf()[k]);
            }
        }
    }
}

#[test]
fn beta_binomial_var_reference_values() {
    // scipy.stats.betabinom(n, a, b).ppf(alpha)
    let cases = [
        ((2.42, 6.78, 25), [12, 14, 17]),
        ((0.73, 2.57, 25), [14, 16, 21]),
        ((0.68, 2.38, 25), [14, 17, 21]),
        ((0.48, 1.72, 25), [15, 18, 23]),
        ((2.42, 6.78, 6000), [2729, 3107, 3794]),
        ((0.73, 2.57, 6000), [3139, 3788, 4798]),
    ];
    for ((a, b, d), want) in cases {
        let dist = beta_binomial_pmf(&BetaParams::new(a, b).unwrap(), d).unwrap();
        let got: Vec<usize> = [0.90, 0.95, 0.99].iter().map(|&al| var_alpha(&dist, al).unwrap()).collect();
        assert_eq!(got, want, "({a}, {b}, {d})");
    }
}

#[test]
fn beta_fit_from_reported_moments() {
    // by hand: ρ = (0.0883 − 0.2635²)/(0.2635·0.7365) = 0.0972229…,
    // a + b = 1/ρ − 1 = 9.28568…
    let rho = default_correlation(0.2635, 0.0883).unwrap();
    assert!((rho - 0.097223).abs() < 1e-6, "{rho}");
    let p = beta_fit_moments(0.2635, 0.0883).unwrap();
    assert!((p.a - 2.44678).abs() < 1e-4 && (p.b - 6.83891).abs() < 1e-4, "{p:?}");
    // the (p, ρ) printed next to the fitted parameters reproduce them
    let p = BetaParams::from_mean_correlation(0.2630, 0.0980).unwrap();
    assert!((p.a - 2.42).abs() < 0.01 && (p.b - 6.78).abs() < 0.01, "{p:?}");
}

#[test]
fn export_and_reread() {
    let dir = tempfile::tempdir().unwrap();
    let uniform = empirical_count_pmf(&sample(vec![0.5]), 2).unwrap();
    let path = dir.path().join("u.csv");
    export_pmf(&uniform, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,probability"));
    for (line, (k, want)) in lines.zip([(0, 0.25), (1, 0.5), (2, 0.25)]) {
        let (kk, v) = line.split_once(',').unwrap();
        assert_eq!(kk.parse::<usize>().unwrap(), k);
        assert!((v.parse::<f64>().unwrap() - want).abs() < 1e-15);
    }

    let big = beta_binomial_pmf(&BetaParams::new(2.42, 6.78).unwrap(), 6000).unwrap();
    let path = dir.path().join("nested/big.csv");
    export_pmf(&big, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 6002);
    let sum: f64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-10);
    let back = CountDistribution::read_csv(&path, DistributionSource::BetaBinomial).unwrap();
    let gap = back.pmf().iter().zip(big.pmf()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-15, "{gap}");
    assert!(export_pmf(&big, "").is_err());
}

#[test]
fn kl_direction_and_infinity() {
    let np = CountDistribution::new(vec![0.5, 0.5, 0.0], DistributionSource::Nonparametric).unwrap();
    let bb = CountDistribution::new(vec![0.25, 0.5, 0.25], DistributionSource::BetaBinomial).unwrap();
    let forward = kl_divergence(&np, &bb).unwrap();
    assert!((forward - (0.5 * 2f64.ln() + 0.5 * 1f64.ln())).abs() < 1e-15);
    assert!(kl_divergence(&bb, &np).unwrap().is_infinite());
}
