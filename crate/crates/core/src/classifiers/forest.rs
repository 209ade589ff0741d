use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_config, grow, DecisionTree, Presorted, TreeConfig};
use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `⌈√m⌉`.
    pub m_try: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 5,
            m_try: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub m_try: usize,
    pub bootstrap: bool,
    /// One seed per tree, drawn in order from the master seed.
    pub tree_seeds: Vec<u64>,
    pub n_train: usize,
    m: usize,
}

pub fn default_m_try(m: usize) -> usize {
    ((m as f64).sqrt().ceil() as usize).clamp(1, m)
}

/// Bootstrap multiplicities for one tree: `n` draws with replacement.
fn bootstrap_counts(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1.0;
    }
    counts
}

pub fn rf_fit(train: &LabeledSample, cfg: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let m_try = cfg.m_try.unwrap_or_else(|| default_m_try(train.m()));
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        m_try,
    };
    check_config(train, &tree_cfg)?;

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.next_u64()).collect();
    let pre = Presorted::new(train);
    let n = train.n();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let weights = if cfg.bootstrap {
                bootstrap_counts(&mut rng, n)
            } else {
                vec![1.0; n]
            };
            grow(train, &pre, &weights, &tree_cfg, rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_trees: cfg.n_trees,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        m_try,
        bootstrap: cfg.bootstrap,
        tree_seeds,
        n_train: n,
        m: train.m(),
    })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.m
    }

    /// Out-of-bag probabilities for the rows the forest was trained on: each
    /// row averages only the trees whose bootstrap left it out, falling back
    /// to every tree when none did (or when bootstrap is off).
    pub fn oob_predict(&self, train: &LabeledSample) -> Result<Vec<f64>> {
        if train.n() != self.n_train || train.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.n_train,
                got: train.n(),
            });
        }
        let n = train.n();
        let mut sum = vec![0.0; n];
        let mut hits = vec![0usize; n];
        if self.bootstrap {
            let per_tree: Vec<Vec<(usize, f64)>> = self
                .trees
                .par_iter()
                .zip(&self.tree_seeds)
                .map(|(tree, &s)| {
                    let counts = bootstrap_counts(&mut ChaCha8Rng::seed_from_u64(s), n);
                    (0..n)
                        .filter(|&i| counts[i] == 0.0)
                        .map(|i| (i, tree.predict(train.row(i))))
                        .collect()
                })
                .collect();
            for tree_out in per_tree {
                for (i, p) in tree_out {
                    sum[i] += p;
                    hits[i] += 1;
                }
            }
        }
        Ok((0..n)
            .map(|i| {
                if hits[i] > 0 {
                    sum[i] / hits[i] as f64
                } else {
                    self.mean_prediction(train.row(i))
                }
            })
            .collect())
    }

    fn mean_prediction(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Arithmetic mean of the trees' leaf probabilities.
pub fn rf_predict_proba(model: &ForestModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.m {
        return Err(Error::DimensionMismatch {
            expected: model.m,
            got: x.len(),
        });
    }
    Ok(model.mean_prediction(x).clamp(0.0, 1.0))
}
