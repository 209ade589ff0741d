use serde::{Deserialize, Serialize};

use super::beta::{beta_cdf, BetaParams};
use super::count::CountDistribution;
use crate::classifiers::MixingSample;
use crate::error::{Error, Result};

/// `D(P‖Q) = Σ_k P(k) ln(P(k)/Q(k))`, with `0·ln(0/·) = 0`. Returns `+∞`
/// when `Q` puts no mass where `P` does.
pub fn kl_divergence(p_from: &CountDistribution, p_to: &CountDistribution) -> Result<f64> {
    if p_from.d() != p_to.d() {
        return Err(Error::DimensionMismatch {
            expected: p_from.d(),
            got: p_to.d(),
        });
    }
    let mut total = 0.0;
    for (&p, &q) in p_from.pmf().iter().zip(p_to.pmf()) {
        if p <= 0.0 {
            continue;
        }
        if q <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (-odd * odd * c).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test of the mixing sample against a beta
/// law; the p-value uses the asymptotic distribution of `√n·D_n`.
pub fn ks_test(q: &MixingSample, params: &BetaParams) -> Result<KsResult> {
    ks_test_values(&q.q, params)
}

pub(crate) fn ks_test_values(values: &[f64], params: &BetaParams) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = beta_cdf(params, x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(n.sqrt() * statistic),
    })
}
