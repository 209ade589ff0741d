//! Discrete AdaBoost over depth-1 Gini stumps.
//!
//! Labels are mapped to ±1 inside the booster. The additive score
//! `F(x) = Σ w_t h_t(x)` becomes a probability through `1 / (1 + e^{−2F})`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{grow, DecisionTree, Presorted, TreeConfig};
use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

/// Floor on the weighted error when a stump classifies every row correctly.
pub const MIN_STAGE_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostConfig {
    pub n_rounds: usize,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self { n_rounds: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub stump: DecisionTree,
    pub weight: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stages: Vec<Stage>,
    pub n_rounds: usize,
    m: usize,
}

/// `½ ln(1/ε − 1)`.
pub fn stage_weight(error: f64) -> f64 {
    0.5 * (1.0 / error - 1.0).ln()
}

fn signed(stump: &DecisionTree, x: &[f64]) -> f64 {
    if stump.predict(x) >= 0.5 {
        1.0
    } else {
        -1.0
    }
}

pub fn adaboost_fit(train: &LabeledSample, n_rounds: usize, seed: u64) -> Result<AdaBoostModel> {
    if n_rounds == 0 {
        return Err(Error::InvalidArgument("n_rounds must be at least 1".into()));
    }
    let n = train.n();
    let pre = Presorted::new(train);
    let stump_cfg = TreeConfig {
        max_depth: 1,
        min_leaf: 1,
        m_try: train.m(),
    };
    let y: Vec<f64> = train.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut dist = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();

    for _ in 0..n_rounds {
        // m_try = m, so the stump never draws from the generator
        let stump = grow(train, &pre, &dist, &stump_cfg, ChaCha8Rng::seed_from_u64(seed));
        let h: Vec<f64> = (0..n).map(|i| signed(&stump, train.row(i))).collect();
        let error: f64 = (0..n).filter(|&i| h[i] != y[i]).map(|i| dist[i]).sum();
        if error >= 0.5 {
            break;
        }
        if error <= 0.0 {
            stages.push(Stage {
                stump,
                weight: stage_weight(MIN_STAGE_ERROR),
                error,
            });
            break;
        }
        let weight = stage_weight(error);
        for i in 0..n {
            dist[i] *= (-weight * y[i] * h[i]).exp();
        }
        let total: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|d| *d /= total);
        stages.push(Stage { stump, weight, error });
    }
    Ok(AdaBoostModel {
        stages,
        n_rounds,
        m: train.m(),
    })
}

impl AdaBoostModel {
    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: x.len(),
            });
        }
        Ok(self.stages.iter().map(|s| s.weight * signed(&s.stump, x)).sum())
    }

    /// Sign of the additive score, as a {0,1} label (0 on a zero score).
    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok((self.score(x)? > 0.0) as u8)
    }
}

pub fn adaboost_predict_proba(model: &AdaBoostModel, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(2.0 * model.score(x)?))
}
