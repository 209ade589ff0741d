//! Weighted CART classification trees (Gini impurity, axis-aligned splits).
//!
//! Each feature is sorted once per fit. Sorted index lists are partitioned
//! down the tree, so a node costs `O(rows × features)` and never re-sorts.
//! Row weights double as bootstrap multiplicities; rows of weight 0 are
//! ignored. `min_leaf` counts rows of positive weight.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub m_try: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Weighted fraction of positive labels among the rows reaching the leaf.
    Leaf { prob: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { prob } => return prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// `(feature, threshold)` of the root, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Column-major copy of the features with each column's row order sorted by
/// value (ties by row index).
pub(crate) struct Presorted {
    columns: Vec<Vec<f64>>,
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(data: &LabeledSample) -> Self {
        let columns: Vec<Vec<f64>> = (0..data.m()).map(|j| data.column(j)).collect();
        let orders = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, orders }
    }
}

/// Weighted Gini impurity of a node: `w · (1 − p² − (1−p)²)`.
fn gini(w: f64, w_pos: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        2.0 * w_pos * (w - w_pos) / w
    }
}

struct Builder<'a> {
    pre: &'a Presorted,
    labels: &'a [u8],
    weights: &'a [f64],
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
    go_left: Vec<bool>,
    nodes: Vec<Node>,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> usize {
        let here = self.nodes.len();
        let (w, w_pos) = orders[0].iter().fold((0.0, 0.0), |(w, wp), &i| {
            let wi = self.weights[i as usize];
            (w + wi, wp + wi * f64::from(self.labels[i as usize]))
        });
        let prob = if w > 0.0 { (w_pos / w).clamp(0.0, 1.0) } else { 0.0 };
        self.nodes.push(Node::Leaf { prob });

        let count = orders[0].len();
        if depth >= self.cfg.max_depth || count < 2 * self.cfg.min_leaf.max(1) || w_pos <= 0.0 || w_pos >= w {
            return here;
        }
        let Some(best) = self.best_split(&orders, w, w_pos) else {
            return here;
        };

        let col = &self.pre.columns[best.feature];
        for &i in &orders[best.feature] {
            self.go_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let mut left_orders = Vec::with_capacity(orders.len());
        let mut right_orders = Vec::with_capacity(orders.len());
        for list in orders {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| self.go_left[i as usize]);
            left_orders.push(l);
            right_orders.push(r);
        }
        let left = self.build(left_orders, depth + 1);
        let right = self.build(right_orders, depth + 1);
        self.nodes[here] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        here
    }

    fn best_split(&mut self, orders: &[Vec<u32>], w: f64, w_pos: f64) -> Option<Candidate> {
        let m = orders.len();
        let features: Vec<usize> = if self.cfg.m_try >= m {
            (0..m).collect()
        } else {
            let mut f = sample(&mut self.rng, m, self.cfg.m_try).into_vec();
            f.sort_unstable();
            f
        };
        let min_leaf = self.cfg.min_leaf.max(1);
        let parent = gini(w, w_pos);
        let mut best: Option<Candidate> = None;
        for f in features {
            let col = &self.pre.columns[f];
            let list = &orders[f];
            let n = list.len();
            let (mut wl, mut wpl) = (0.0, 0.0);
            for (pos, pair) in list.windows(2).enumerate() {
                let i = pair[0] as usize;
                wl += self.weights[i];
                wpl += self.weights[i] * f64::from(self.labels[i]);
                let left_count = pos + 1;
                if left_count < min_leaf || n - left_count < min_leaf {
                    continue;
                }
                let (v, next) = (col[i], col[pair[1] as usize]);
                if v == next {
                    continue;
                }
                let impurity = gini(wl, wpl) + gini(w - wl, w_pos - wpl);
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(Candidate {
                        impurity,
                        feature: f,
                        threshold: 0.5 * (v + next),
                    });
                }
            }
        }
        best.filter(|b| parent - b.impurity > 1e-12 * w)
    }
}

pub(crate) fn grow(
    data: &LabeledSample,
    pre: &Presorted,
    weights: &[f64],
    cfg: &TreeConfig,
    rng: ChaCha8Rng,
) -> DecisionTree {
    let root: Vec<Vec<u32>> = pre
        .orders
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0.0).collect())
        .collect();
    let mut b = Builder {
        pre,
        labels: data.labels(),
        weights,
        cfg,
        rng,
        go_left: vec![false; data.n()],
        nodes: Vec::new(),
    };
    b.build(root, 0);
    DecisionTree { nodes: b.nodes }
}

pub(crate) fn check_weights(data: &LabeledSample, weights: &[f64]) -> Result<()> {
    if weights.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    Ok(())
}

pub(crate) fn check_config(data: &LabeledSample, cfg: &TreeConfig) -> Result<()> {
    if cfg.m_try == 0 || cfg.m_try > data.m() {
        return Err(Error::InvalidArgument(format!(
            "m_try = {} must lie in 1..={}",
            cfg.m_try,
            data.m()
        )));
    }
    Ok(())
}

pub fn tree_fit(
    train: &LabeledSample,
    weights: &[f64],
    max_depth: usize,
    min_leaf: usize,
    m_try: usize,
    seed: u64,
) -> Result<DecisionTree> {
    let cfg = TreeConfig {
        max_depth,
        min_leaf,
        m_try,
    };
    check_weights(train, weights)?;
    check_config(train, &cfg)?;
    let pre = Presorted::new(train);
    Ok(grow(train, &pre, weights, &cfg, ChaCha8Rng::seed_from_u64(seed)))
}
