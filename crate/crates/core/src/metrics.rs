//! Classification measures: confusion matrix, precision, recall, F1, ROC and
//! AUC.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with the roles of the two classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

fn check_lengths(pred: &[f64], labels: &[u8]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Predicted positive iff `q >= threshold`.
pub fn confusion_at_threshold(pred: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    check_lengths(pred, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&q, &y) in pred.iter().zip(labels) {
        match (q >= threshold, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// A ratio whose denominator may vanish; then `value` is 0 and
/// `zero_division` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub zero_division: bool,
}

impl Rate {
    fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Rate {
                value: num / den,
                zero_division: false,
            }
        } else {
            Rate {
                value: 0.0,
                zero_division: true,
            }
        }
    }
}

pub fn precision(cm: &ConfusionMatrix) -> Rate {
    Rate::ratio(cm.tp as f64, (cm.tp + cm.fp) as f64)
}

pub fn recall(cm: &ConfusionMatrix) -> Rate {
    Rate::ratio(cm.tp as f64, (cm.tp + cm.fn_) as f64)
}

/// Harmonic mean of precision and recall.
pub fn f1(cm: &ConfusionMatrix) -> Rate {
    let (p, r) = (precision(cm), recall(cm));
    let mut out = Rate::ratio(2.0 * p.value * r.value, p.value + r.value);
    out.zero_division |= p.zero_division || r.zero_division;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Positive-class scores and their support-weighted average over both
/// classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub positive: ClassScores,
    pub weighted: ClassScores,
    pub auc: f64,
}

pub fn classification_report(pred: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationReport> {
    let cm = confusion_at_threshold(pred, labels, threshold)?;
    let scores = |c: &ConfusionMatrix| ClassScores {
        precision: precision(c).value,
        recall: recall(c).value,
        f1: f1(c).value,
    };
    let pos = scores(&cm);
    let neg = scores(&cm.swapped());
    let n_pos = (cm.tp + cm.fn_) as f64;
    let n_neg = (cm.tn + cm.fp) as f64;
    let n = n_pos + n_neg;
    let avg = |a: f64, b: f64| (n_pos * a + n_neg * b) / n;
    Ok(ClassificationReport {
        confusion: cm,
        positive: pos,
        weighted: ClassScores {
            precision: avg(pos.precision, neg.precision),
            recall: avg(pos.recall, neg.recall),
            f1: avg(pos.f1, neg.f1),
        },
        auc: roc_auc(pred, labels)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Threshold reached at each point; the first is `+∞`.
    pub thresholds: Vec<f64>,
}

fn class_totals(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC points at every distinct score, thresholds decreasing. Tied scores
/// move in one diagonal step.
pub fn roc_curve(pred: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_lengths(pred, labels)?;
    let (pos, neg) = class_totals(labels)?;
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]));
    let mut curve = RocCurve {
        fpr: vec![0.0],
        tpr: vec![0.0],
        thresholds: vec![f64::INFINITY],
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = pred[order[i]];
        while i < order.len() && pred[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.fpr.push(fp as f64 / neg as f64);
        curve.tpr.push(tp as f64 / pos as f64);
        curve.thresholds.push(t);
    }
    Ok(curve)
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * 0.5)
            .sum()
    }

    /// Two-column CSV `fpr,tpr`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "fpr,tpr").map_err(io)?;
        for (x, y) in self.fpr.iter().zip(&self.tpr) {
            writeln!(w, "{x},{y}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn roc_auc(pred: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(roc_curve(pred, labels)?.auc().clamp(0.0, 1.0))
}
