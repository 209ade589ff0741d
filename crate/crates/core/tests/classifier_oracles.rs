//! Classifiers, calibration and metrics against brute-force references.

use credit_mixture::calibration::{
    calibrate, expected_calibration_error, isotonic_fit, pava, platt_fit, CalibrationMethod,
};
use credit_mixture::classifiers::{
    adaboost::stage_weight, adaboost_fit, fit_model, knn_fit, knn_predict_proba, load_model, logistic_fit, rf_fit,
    rf_predict_proba, save_model, tree_fit, ClassifierConfig, ForestConfig, ModelTag,
};
use credit_mixture::dataset::LabeledSample;
use credit_mixture::metrics::{classification_report, confusion_at_threshold, f1, precision, recall, roc_auc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn simulate_1d(n: usize, b0: f64, b1: f64, seed: u64) -> LabeledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<u8> = x.iter().map(|&v| (rng.random::<f64>() < logistic(b0 + b1 * v)) as u8).collect();
    LabeledSample::new(x, y, 1).unwrap()
}

fn ternary(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn logistic_matches_profile_search() {
    let data = simulate_1d(300, 0.5, 1.5, 4);
    let lambda = 1e-6;
    let loglik = |b0: f64, b1: f64| -> f64 {
        data.rows()
            .zip(data.labels())
            .map(|(x, &y)| {
                let z = b0 + b1 * x[0];
                f64::from(y) * z - (1.0 + z.exp()).ln()
            })
            .sum::<f64>()
            - 0.5 * lambda * b1 * b1
    };
    // the profile of a concave function is concave, so nested ternary
    // searches find the joint maximum
    let best_b0 = |b1: f64| ternary(-10.0, 10.0, |b0| loglik(b0, b1));
    let b1 = ternary(-10.0, 10.0, |b1| loglik(best_b0(b1), b1));
    let b0 = best_b0(b1);
    let model = logistic_fit(&data, lambda, 1e-10, 100).unwrap();
    assert!(model.converged);
    assert!((model.beta[0] - b0).abs() < 1e-5, "{} vs {b0}", model.beta[0]);
    assert!((model.beta[1] - b1).abs() < 1e-5, "{} vs {b1}", model.beta[1]);
}

#[test]
fn logistic_reports_non_convergence() {
    let data = simulate_1d(200, 0.0, 1.0, 9);
    assert!(logistic_fit(&data, 1e-6, 1e-14, 1).is_err());
}

fn grid_sample(n: usize, m: usize, seed: u64) -> LabeledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * m).map(|_| rng.random_range(0..5) as f64).collect();
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    LabeledSample::new(x, y, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_matches_full_sort(seed in 0u64..1000, k in 1usize..12, qx in prop::collection::vec(0.0..5.0f64, 3)) {
        // integer grid points force distance ties; the lower index wins
        let train = grid_sample(40, 3, seed);
        let model = knn_fit(&train, k).unwrap();
        let mut order: Vec<(f64, usize)> = train
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&qx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want = order[..k].iter().map(|&(_, i)| f64::from(train.labels()[i])).sum::<f64>() / k as f64;
        let got = knn_predict_proba(&model, &qx).unwrap();
        prop_assert!((got - want).abs() < 1e-15);
        prop_assert!(((got * k as f64).round() - got * k as f64).abs() < 1e-12);
        let mut nb = model.neighbors(&qx, None).unwrap();
        nb.sort_unstable();
        let mut want_nb: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
        want_nb.sort_unstable();
        prop_assert_eq!(nb, want_nb);
    }

    #[test]
    fn stump_matches_exhaustive_split(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let m = 3;
        let x: Vec<f64> = (0..n * m).map(|_| (rng.random_range(0..12) as f64) / 2.0).collect();
        let y: Vec<u8> = (0..n).map(|i| ((x[i * m] + rng.random_range(-2.0..2.0)) > 3.0) as u8).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let data = LabeledSample::new(x.clone(), y.clone(), m).unwrap();

        let impurity = |f: usize, t: f64| -> f64 {
            let mut side = [(0.0, 0.0); 2];
            for i in 0..n {
                let s = usize::from(x[i * m + f] > t);
                side[s].0 += w[i];
                side[s].1 += w[i] * f64::from(y[i]);
            }
            side.iter()
                .filter(|(tw, _)| *tw > 0.0)
                .map(|&(tw, pw)| {
                    let p = pw / tw;
                    tw * 2.0 * p * (1.0 - p)
                })
                .sum()
        };
        let parent: f64 = {
            let tw: f64 = w.iter().sum();
            let p = w.iter().zip(&y).map(|(a, &b)| a * f64::from(b)).sum::<f64>() / tw;
            tw * 2.0 * p * (1.0 - p)
        };
        let mut best = f64::INFINITY;
        for f in 0..m {
            let mut vals: Vec<f64> = (0..n).map(|i| x[i * m + f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                best = best.min(impurity(f, 0.5 * (pair[0] + pair[1])));
            }
        }
        let tree = tree_fit(&data, &w, 1, 1, m, 0).unwrap();
        match tree.root_split() {
            Some((f, t)) => {
                prop_assert!((impurity(f, t) - best).abs() < 1e-9, "{} vs {best}", impurity(f, t));
                let left: Vec<usize> = (0..n).filter(|&i| x[i * m + f] <= t).collect();
                let lw: f64 = left.iter().map(|&i| w[i]).sum();
                let lp = left.iter().map(|&i| w[i] * f64::from(y[i])).sum::<f64>() / lw;
                let probe: Vec<f64> = (0..m).map(|j| if j == f { t } else { 0.0 }).collect();
                prop_assert!((tree.predict(&probe) - lp).abs() < 1e-12);
            }
            None => prop_assert!(parent - best <= 1e-12 * w.iter().sum::<f64>()),
        }
    }

    #[test]
    fn isotonic_matches_min_max_formula(
        raw in prop::collection::vec((0u8..6, 0u8..2), 1..10),
    ) {
        let scores: Vec<f64> = raw.iter().map(|&(s, _)| f64::from(s) / 5.0).collect();
        let labels: Vec<u8> = raw.iter().map(|&(_, y)| y).collect();
        // tied scores form one block first
        let mut distinct = scores.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let groups: Vec<(f64, f64)> = distinct
            .iter()
            .map(|&s| {
                let idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == s).collect();
                let mean = idx.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / idx.len() as f64;
                (mean, idx.len() as f64)
            })
            .collect();
        let g = groups.len();
        let avg = |j: usize, k: usize| {
            let (s, w) = groups[j..=k].iter().fold((0.0, 0.0), |(s, w), &(v, c)| (s + v * c, w + c));
            s / w
        };
        let map = isotonic_fit(&scores, &labels).unwrap();
        for i in 0..g {
            let want = (0..=i).map(|j| (i..g).map(|k| avg(j, k)).fold(f64::INFINITY, f64::min)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((map.apply(distinct[i]) - want).abs() < 1e-10);
        }
        let values: Vec<f64> = groups.iter().map(|g| g.0).collect();
        let weights: Vec<f64> = groups.iter().map(|g| g.1).collect();
        let fitted = pava(&values, &weights);
        prop_assert!(fitted.windows(2).all(|w| w[0] <= w[1] + 1e-15));
    }

    #[test]
    fn auc_matches_pair_count(raw in prop::collection::vec((0u8..8, 0u8..2), 2..60)) {
        let pred: Vec<f64> = raw.iter().map(|&(s, _)| f64::from(s) / 7.0).collect();
        let labels: Vec<u8> = raw.iter().map(|&(_, y)| y).collect();
        let pos: Vec<f64> = pred.iter().zip(&labels).filter(|(_, &y)| y == 1).map(|(p, _)| *p).collect();
        let neg: Vec<f64> = pred.iter().zip(&labels).filter(|(_, &y)| y == 0).map(|(p, _)| *p).collect();
        match roc_auc(&pred, &labels) {
            Ok(auc) => {
                let mut wins = 0.0;
                for a in &pos {
                    for b in &neg {
                        wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                    }
                }
                let want = wins / (pos.len() * neg.len()) as f64;
                prop_assert!((auc - want).abs() < 1e-12, "{auc} vs {want}");
            }
            Err(_) => prop_assert!(pos.is_empty() || neg.is_empty()),
        }
    }

    #[test]
    fn isotonic_output_nondecreasing(
        raw in prop::collection::vec((0.0..1.0f64, 0u8..2), 2..80),
        probes in prop::collection::vec(-0.5..1.5f64, 2..20),
    ) {
        let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let labels: Vec<u8> = raw.iter().map(|r| r.1).collect();
        let map = isotonic_fit(&scores, &labels).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        for w in probes.windows(2) {
            prop_assert!(map.apply(w[0]) <= map.apply(w[1]));
        }
    }
}

#[test]
fn forest_is_mean_of_its_trees() {
    let data = grid_sample(80, 4, 5);
    let cfg = ForestConfig {
        n_trees: 5,
        max_depth: 4,
        min_leaf: 2,
        m_try: None,
        bootstrap: true,
    };
    let model = rf_fit(&data, &cfg, 17).unwrap();
    assert_eq!(model.trees.len(), 5);
    for x in data.rows().take(20) {
        let mean = model.trees.iter().map(|t| t.predict(x)).sum::<f64>() / 5.0;
        assert!((rf_predict_proba(&model, x).unwrap() - mean).abs() < 1e-15);
    }
    assert_eq!(rf_fit(&data, &cfg, 17).unwrap(), model);
}

#[test]
fn single_separating_stump() {
    let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let y: Vec<u8> = (0..20).map(|i| (i >= 12) as u8).collect();
    let data = LabeledSample::new(x, y.clone(), 1).unwrap();
    let model = adaboost_fit(&data, 1, 0).unwrap();
    assert_eq!(model.stages.len(), 1);
    let stage = &model.stages[0];
    for (row, &label) in data.rows().zip(&y) {
        assert_eq!(model.classify(row).unwrap(), label);
        assert_eq!((stage.stump.predict(row) >= 0.5) as u8, label);
    }
    // zero training error keeps the stage with its weight capped
    assert_eq!(stage.weight, stage_weight(1e-10));
    assert!((stage_weight(0.25) - 0.5 * 3f64.ln()).abs() < 1e-15);
}

#[test]
fn platt_recovers_simulated_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (a, b) = (-2.0, 0.5);
    let scores: Vec<f64> = (0..20_000).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels: Vec<u8> = scores.iter().map(|&s| (rng.random::<f64>() < logistic(-(a * s + b))) as u8).collect();
    let map = platt_fit(&scores, &labels).unwrap();
    assert!((map.a - a).abs() < 0.06 && (map.b - b).abs() < 0.06, "{map:?}");
}

#[test]
fn calibration_prefers_lower_ece() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // true probability is a step in the score: isotonic fits it, a sigmoid cannot
    let step = |s: f64| if s < 0.5 { 0.1 } else { 0.9 };
    let draw = |rng: &mut ChaCha8Rng, n: usize| {
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = s.iter().map(|&v| (rng.random::<f64>() < step(v)) as u8).collect();
        (s, y)
    };
    let (cs, cy) = draw(&mut rng, 4000);
    let (vs, vy) = draw(&mut rng, 4000);
    let choice = calibrate(&cs, &cy, &vs, &vy, 10).unwrap();
    assert!(choice.isotonic_ece < choice.platt_ece);
    assert_eq!(choice.method, CalibrationMethod::Isotonic);
}

#[test]
fn ece_and_rates_by_hand() {
    let ece = expected_calibration_error(&[0.1, 0.1, 0.9, 0.9], &[0, 1, 1, 1], 10).unwrap();
    assert!((ece - 0.25).abs() < 1e-15);

    // tp = 3, fp = 1, tn = 4, fn = 2
    let pred = [0.9, 0.8, 0.7, 0.6, 0.1, 0.2, 0.3, 0.4, 0.45, 0.0];
    let labels = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
    let cm = confusion_at_threshold(&pred, &labels, 0.5).unwrap();
    assert_eq!((cm.tp, cm.fp, cm.tn, cm.fn_), (3, 1, 4, 2));
    assert_eq!(precision(&cm).value, 0.75);
    assert_eq!(recall(&cm).value, 0.6);
    assert!((f1(&cm).value - 2.0 / 3.0).abs() < 1e-15);
    let r = classification_report(&pred, &labels, 0.5).unwrap();
    // negative class: precision 4/6, recall 4/5; both classes have support 5
    let neg_f1 = 2.0 * (4.0 / 6.0) * 0.8 / (4.0 / 6.0 + 0.8);
    assert!((r.weighted.precision - 0.5 * (0.75 + 4.0 / 6.0)).abs() < 1e-15);
    assert!((r.weighted.recall - 0.5 * (0.6 + 0.8)).abs() < 1e-15);
    assert!((r.weighted.f1 - 0.5 * (2.0 / 3.0 + neg_f1)).abs() < 1e-15);

    let none = confusion_at_threshold(&[0.1, 0.2], &[0, 1], 0.5).unwrap();
    assert!(precision(&none).zero_division);
}

#[test]
fn models_survive_serialization() {
    let data = grid_sample(60, 3, 8);
    let mut cfg = ClassifierConfig::default();
    cfg.knn.k = 5;
    cfg.rf.n_trees = 10;
    cfg.ab.n_rounds = 10;
    let dir = tempfile::tempdir().unwrap();
    for tag in ModelTag::ALL {
        let model = fit_model(tag, &data, &cfg, 3).unwrap();
        let path = dir.path().join(format!("{}.json", tag.as_str()));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        for x in data.rows() {
            assert_eq!(back.predict_proba(x).unwrap(), model.predict_proba(x).unwrap());
        }
    }
}
