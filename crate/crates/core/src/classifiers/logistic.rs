//! First-order logistic regression fitted by Newton's method (IRLS) on the
//! ridge-penalized log-likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub ridge_lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Intercept first, then one coefficient per covariate.
    pub beta: Vec<f64>,
    pub ridge_lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Penalized log-likelihood `ℒ(β) − λ‖β₁..‖²/2`.
fn objective(rows: &[f64], m: usize, labels: &[u8], beta: &[f64], lambda: f64) -> f64 {
    let mut ll = 0.0;
    for (x, &y) in rows.chunks_exact(m).zip(labels) {
        let z = linear_score(beta, x);
        ll += f64::from(y) * z - softplus(z);
    }
    ll - 0.5 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

pub(crate) fn linear_score(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Fit on a flat row-major design (`m` covariates per row, no intercept column).
///
/// Convergence is declared when the gradient norm of the penalized
/// log-likelihood, divided by the number of rows, falls below `tol`.
pub(crate) fn fit_rows(rows: &[f64], m: usize, labels: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(cfg.tol > 0.0) || cfg.ridge_lambda < 0.0 {
        return Err(Error::InvalidArgument("tol must be > 0 and ridge_lambda >= 0".into()));
    }
    let p = m + 1;
    let lambda = cfg.ridge_lambda;
    let mut beta = vec![0.0; p];
    let mut current = objective(rows, m, labels, &beta, lambda);
    let mut grad_norm = f64::INFINITY;

    for iter in 0..cfg.max_iter {
        let mut grad = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut ll = 0.0;
        for (x, &y) in rows.chunks_exact(m).zip(labels) {
            let z = linear_score(&beta, x);
            let mu = sigmoid(z);
            ll += f64::from(y) * z - softplus(z);
            let r = f64::from(y) - mu;
            let w = mu * (1.0 - mu);
            grad[0] += r;
            for a in 0..m {
                grad[a + 1] += r * x[a];
            }
            info[(0, 0)] += w;
            for a in 0..m {
                let wa = w * x[a];
                info[(a + 1, 0)] += wa;
                for b in 0..=a {
                    info[(a + 1, b + 1)] += wa * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        for j in 1..p {
            grad[j] -= lambda * beta[j];
            info[(j, j)] += lambda;
        }
        grad_norm = grad.norm() / n as f64;
        if grad_norm < cfg.tol {
            if lambda == 0.0 && separates(rows, m, labels, &beta) {
                return Err(Error::Divergent);
            }
            return Ok(LogisticModel {
                beta,
                ridge_lambda: lambda,
                converged: true,
                iterations: iter,
            });
        }
        // every fitted probability has collapsed onto its label
        if lambda == 0.0 && ll > -1e-9 * n as f64 {
            return Err(Error::Divergent);
        }
        let Some(chol) = info.clone().cholesky() else {
            return Err(if lambda == 0.0 {
                Error::Divergent
            } else {
                Error::Numerical("singular information matrix".into())
            });
        };
        let step = chol.solve(&grad);

        // step halving keeps the objective monotone
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let value = objective(rows, m, labels, &trial, lambda);
            if value >= current - 1e-12 * current.abs().max(1.0) {
                beta = trial;
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NotConverged {
                iterations: iter + 1,
                grad_norm,
            });
        }
        if lambda == 0.0 && beta.iter().any(|b| b.abs() > 1e8) {
            return Err(Error::Divergent);
        }
    }
    if lambda == 0.0 && separates(rows, m, labels, &beta) {
        return Err(Error::Divergent);
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        grad_norm,
    })
}

/// A finite maximizer never classifies every row correctly; if `beta`
/// does, the classes are linearly separable and the MLE does not exist.
fn separates(rows: &[f64], m: usize, labels: &[u8], beta: &[f64]) -> bool {
    rows.chunks_exact(m).zip(labels).all(|(x, &y)| {
        let z = linear_score(beta, x);
        if y == 1 {
            z > 0.0
        } else {
            z < 0.0
        }
    })
}

pub fn logistic_fit(train: &LabeledSample, ridge_lambda: f64, tol: f64, max_iter: usize) -> Result<LogisticModel> {
    let flat: Vec<f64> = train.rows().flatten().copied().collect();
    fit_rows(
        &flat,
        train.m(),
        train.labels(),
        &LogisticConfig {
            ridge_lambda,
            tol,
            max_iter,
        },
    )
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(linear_score(&self.beta, x))
    }
}

/// `1 / (1 + exp(−βᵀx̃))` with `x̃ = (1, x)`.
pub fn logistic_predict(model: &LogisticModel, x: &[f64]) -> Result<f64> {
    model.score(x).map(sigmoid)
}
