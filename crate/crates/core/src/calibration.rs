//! Probability calibration: Platt scaling, isotonic regression (pool
//! adjacent violators) and expected calibration error over equal-width bins.

use serde::{Deserialize, Serialize};

use crate::classifiers::logistic::{fit_rows, sigmoid, LogisticConfig};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// `q = 1 / (1 + exp(A·s + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattMap {
    pub a: f64,
    pub b: f64,
}

impl PlattMap {
    pub fn apply(&self, s: f64) -> f64 {
        sigmoid(-(self.a * s + self.b))
    }
}

/// Maximum-likelihood Platt fit, using the logistic-regression optimizer on
/// the one-dimensional score without a penalty.
pub fn platt_fit(scores: &[f64], labels: &[u8]) -> Result<PlattMap> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if scores.iter().all(|&s| s == scores[0]) {
        let rate = pos as f64 / labels.len() as f64;
        return Ok(PlattMap {
            a: 0.0,
            b: -(rate / (1.0 - rate)).ln(),
        });
    }
    let cfg = LogisticConfig {
        ridge_lambda: 0.0,
        tol: 1e-10,
        max_iter: 100,
    };
    let model = fit_rows(scores, 1, labels, &cfg)?;
    Ok(PlattMap {
        a: -model.beta[1],
        b: -model.beta[0],
    })
}

/// Weighted pool-adjacent-violators: the nondecreasing sequence minimizing
/// `Σ w_i (fit_i − y_i)²`, with `values` already in the desired order.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks as (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            let merged = if w > 0.0 { (m1 * w1 + m2 * w2) / w } else { 0.5 * (m1 + m2) };
            *blocks.last_mut().expect("two blocks") = (merged, w, l1 + l2);
        }
    }
    blocks.into_iter().flat_map(|(m, _, l)| std::iter::repeat_n(m, l)).collect()
}

/// Right-continuous step function through the isotonic fit, clamped at
/// the extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

impl IsotonicMap {
    pub fn apply(&self, s: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= s);
        let level = if idx == 0 { self.levels[0] } else { self.levels[idx - 1] };
        level.clamp(0.0, 1.0)
    }
}

/// Isotonic regression of labels on scores. Equal scores are pooled first,
/// so each distinct score gets one level.
pub fn isotonic_fit(scores: &[f64], labels: &[u8]) -> Result<IsotonicMap> {
    check_inputs(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut breakpoints = Vec::new();
    let mut means = Vec::new();
    let mut weights = Vec::new();
    for &i in &order {
        let y = f64::from(labels[i]);
        if breakpoints.last() == Some(&scores[i]) {
            let w: &mut f64 = weights.last_mut().expect("block");
            let m: &mut f64 = means.last_mut().expect("block");
            *m = (*m * *w + y) / (*w + 1.0);
            *w += 1.0;
        } else {
            breakpoints.push(scores[i]);
            means.push(y);
            weights.push(1.0);
        }
    }
    let levels = pava(&means, &weights);
    Ok(IsotonicMap { breakpoints, levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMethod {
    Platt,
    Isotonic,
}

impl std::fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CalibrationMethod::Platt => "platt",
            CalibrationMethod::Isotonic => "isotonic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum CalibrationMap {
    Identity,
    Platt(PlattMap),
    Isotonic(IsotonicMap),
}

impl CalibrationMap {
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            CalibrationMap::Identity => s.clamp(0.0, 1.0),
            CalibrationMap::Platt(p) => p.apply(s),
            CalibrationMap::Isotonic(i) => i.apply(s),
        }
    }

    pub fn apply_all(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply(s)).collect()
    }
}

/// Equal-width partition of [0,1]; empty bins carry zero weight and zero
/// means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBins {
    pub n_bins: usize,
    pub mean_pred: Vec<f64>,
    pub pos_rate: Vec<f64>,
    pub weight: Vec<f64>,
    pub count: Vec<usize>,
}

impl ReliabilityBins {
    pub fn ece(&self) -> f64 {
        (0..self.n_bins)
            .map(|b| self.weight[b] * (self.mean_pred[b] - self.pos_rate[b]).abs())
            .sum()
    }
}

pub fn bin_index(p: f64, n_bins: usize) -> usize {
    ((p * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1)
}

pub fn reliability_bins(pred: &[f64], labels: &[u8], n_bins: usize) -> Result<ReliabilityBins> {
    check_inputs(pred, labels)?;
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    let mut sum_pred = vec![0.0; n_bins];
    let mut sum_pos = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in pred.iter().zip(labels) {
        let b = bin_index(p, n_bins);
        sum_pred[b] += p;
        sum_pos[b] += f64::from(y);
        count[b] += 1;
    }
    let n = pred.len() as f64;
    let div = |s: f64, c: usize| if c > 0 { s / c as f64 } else { 0.0 };
    Ok(ReliabilityBins {
        n_bins,
        mean_pred: (0..n_bins).map(|b| div(sum_pred[b], count[b])).collect(),
        pos_rate: (0..n_bins).map(|b| div(sum_pos[b], count[b])).collect(),
        weight: count.iter().map(|&c| c as f64 / n).collect(),
        count,
    })
}

/// `Σ_b (n_b/n)·|mean_pred_b − pos_rate_b|` over equal-width bins.
pub fn expected_calibration_error(pred: &[f64], labels: &[u8], n_bins: usize) -> Result<f64> {
    Ok(reliability_bins(pred, labels, n_bins)?.ece().clamp(0.0, 1.0))
}

/// Smaller validation ECE wins; ties go to Platt.
pub fn select_calibration(platt_ece: f64, isotonic_ece: f64) -> CalibrationMethod {
    if isotonic_ece < platt_ece {
        CalibrationMethod::Isotonic
    } else {
        CalibrationMethod::Platt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationChoice {
    pub method: CalibrationMethod,
    /// Infinite when the Platt fit failed (e.g. separable scores).
    #[serde(with = "crate::serde_float")]
    pub platt_ece: f64,
    #[serde(with = "crate::serde_float")]
    pub isotonic_ece: f64,
    pub map: CalibrationMap,
}

/// Fits both maps on the calibration scores, measures ECE on the validation
/// scores and keeps the better map.
pub fn calibrate(
    calib_scores: &[f64],
    calib_labels: &[u8],
    val_scores: &[f64],
    val_labels: &[u8],
    n_bins: usize,
) -> Result<CalibrationChoice> {
    let iso = isotonic_fit(calib_scores, calib_labels)?;
    let iso_ece = expected_calibration_error(&iso_apply_all(&iso, val_scores), val_labels, n_bins)?;
    let platt = match platt_fit(calib_scores, calib_labels) {
        Ok(p) => Some(p),
        Err(Error::Divergent | Error::NotConverged { .. } | Error::Numerical(_)) => {
            log::warn!("Platt scaling failed on the calibration scores; falling back to isotonic");
            None
        }
        Err(e) => return Err(e),
    };
    let platt_ece = match &platt {
        Some(p) => {
            let pred: Vec<f64> = val_scores.iter().map(|&s| p.apply(s)).collect();
            expected_calibration_error(&pred, val_labels, n_bins)?
        }
        None => f64::INFINITY,
    };
    let method = select_calibration(platt_ece, iso_ece);
    let map = match (method, platt) {
        (CalibrationMethod::Platt, Some(p)) => CalibrationMap::Platt(p),
        _ => CalibrationMap::Isotonic(iso),
    };
    Ok(CalibrationChoice {
        method,
        platt_ece,
        isotonic_ece: iso_ece,
        map,
    })
}

fn iso_apply_all(map: &IsotonicMap, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| map.apply(s)).collect()
}
