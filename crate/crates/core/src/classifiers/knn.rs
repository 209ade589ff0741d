use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 25 }
    }
}

/// Stores the (standardized) training rows; the predicted default
/// probability is the fraction of defaulters among the `k` nearest rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: Metric,
    points: Vec<f64>,
    labels: Vec<u8>,
    m: usize,
}

pub fn knn_fit(train: &LabeledSample, k: usize) -> Result<KnnModel> {
    if k == 0 || k > train.n() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={} (training rows)",
            train.n()
        )));
    }
    Ok(KnnModel {
        k,
        metric: Metric::Euclidean,
        points: train.rows().flatten().copied().collect(),
        labels: train.labels().to_vec(),
        m: train.m(),
    })
}

impl KnnModel {
    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    /// Indices of the `k` nearest training rows, nearest first. Equal
    /// distances are ordered by training index. `exclude` drops one training
    /// row from the candidates (leave-one-out scoring).
    pub fn neighbors(&self, x: &[f64], exclude: Option<usize>) -> Result<Vec<usize>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: x.len(),
            });
        }
        let available = self.n_train() - usize::from(exclude.is_some());
        if self.k > available {
            return Err(Error::InvalidArgument(format!("k = {} exceeds {available} candidates", self.k)));
        }
        let mut cand: Vec<(f64, usize)> = self
            .points
            .chunks_exact(self.m)
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < cand.len() {
            cand.select_nth_unstable_by(self.k - 1, cmp);
            cand.truncate(self.k);
        }
        cand.sort_unstable_by(cmp);
        Ok(cand.into_iter().map(|(_, i)| i).collect())
    }

    fn fraction_positive(&self, neighbors: &[usize]) -> f64 {
        neighbors.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / self.k as f64
    }

    /// Leave-one-out probability for training row `i`.
    pub fn predict_proba_excluding(&self, i: usize) -> Result<f64> {
        let x = self.points[i * self.m..(i + 1) * self.m].to_vec();
        Ok(self.fraction_positive(&self.neighbors(&x, Some(i))?))
    }
}

pub fn knn_predict_proba(model: &KnnModel, x: &[f64]) -> Result<f64> {
    Ok(model.fraction_positive(&model.neighbors(x, None)?))
}
