//! Synthetic obligor tables in the credit-card default layout.
//!
//! Used by the runnable examples and the pipeline tests when the real table
//! is not at hand. A persistent latent risk drives the repayment-status
//! history, utilization and repayments. The log-odds of default combine that
//! latent risk with threshold and interaction effects (late payment on a low
//! limit, utilization above 90%, a U-shaped age profile). Tree ensembles can
//! represent these, a first-order logistic model cannot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CovariateSchema, LabeledSample};

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `n` rows following [`CovariateSchema::kaggle`], default rate near 26%.
pub fn kaggle_like(n: usize, seed: u64) -> LabeledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(n * 23);
    let mut labels = Vec::with_capacity(n);

    for _ in 0..n {
        let risk: f64 = normal.sample(&mut rng);
        let limit = ((11.8 - 0.35 * risk + 0.7 * normal.sample(&mut rng)).exp() / 10_000.0).round().clamp(1.0, 100.0)
            * 10_000.0;
        let sex = 1 + categorical(&mut rng, &[0.4, 0.6]);
        let education = 1 + categorical(&mut rng, &[0.35, 0.47, 0.16, 0.02]);
        let marriage = 1 + categorical(&mut rng, &[0.45, 0.53, 0.02]);
        let age = (21.0 - 14.0 * (1.0 - rng.random::<f64>()).ln()).round().min(79.0);

        // repayment status, oldest month first: -2 no consumption, -1 paid
        // duly, 0 revolving, k >= 1 months of delay
        let mut status = [0.0f64; 6];
        let mut s = 0.6 * risk + 0.6 * normal.sample(&mut rng);
        for st in status.iter_mut() {
            s = 0.75 * s + 0.25 * risk + 0.45 * normal.sample(&mut rng);
            *st = if s < -1.4 {
                -2.0
            } else if s < -0.6 {
                -1.0
            } else if s < 0.55 {
                0.0
            } else {
                ((s - 0.55) * 1.6).ceil().min(8.0)
            };
        }

        let mut util = [0.0f64; 6];
        let mut u = sigmoid(0.8 * risk + 0.5 * normal.sample(&mut rng) - 0.3);
        for ut in util.iter_mut() {
            u = (u + 0.08 * normal.sample(&mut rng)).clamp(0.0, 1.1);
            *ut = u;
        }
        let bills: Vec<f64> = util.iter().map(|u| (u * limit).round()).collect();
        let pays: Vec<f64> = bills
            .iter()
            .map(|b| {
                let frac = sigmoid(-0.9 * risk + 0.7 * normal.sample(&mut rng) - 1.2);
                (b.max(0.0) * frac).round()
            })
            .collect();

        let pay0 = status[5];
        let utilization = util[5];
        let ratio = pays[5] / bills[5].max(1.0);
        let logit = -2.05 + 0.55 * risk
            + if pay0 >= 2.0 { 1.9 } else if pay0 >= 1.0 { 0.8 } else { 0.0 }
            + if pay0 >= 1.0 && limit <= 50_000.0 { 0.9 } else { 0.0 }
            + if utilization > 0.9 { 0.7 } else { 0.0 }
            + 0.0015 * (age - 35.0).powi(2)
            - if ratio > 0.5 && pay0 <= 0.0 { 0.8 } else { 0.0 }
            + if education >= 4 { -0.6 } else { 0.0 };
        let y = (rng.random::<f64>() < sigmoid(logit)) as u8;

        features.push(limit);
        features.push(sex as f64);
        features.push(education as f64);
        features.push(marriage as f64);
        features.push(age);
        features.extend(status.iter().rev());
        features.extend(bills.iter().rev());
        features.extend(pays.iter().rev());
        labels.push(y);
    }
    let schema = CovariateSchema::kaggle();
    LabeledSample::with_names(features, labels, schema.columns().to_vec()).expect("generator emits a valid sample")
}
