//! Exchangeable Bernoulli mixture built on a sample of the mixing variable.
//!
//! Defaults `Y_1..Y_d` are conditionally independent Bernoulli(`Q`) given the
//! mixing variable `Q`. The cross moments `π_k = P(Y_1 = … = Y_k = 1)` equal
//! `E[Q^k]`. They determine the distribution of the number of defaults `S`.
//! Pairwise default correlation is `ρ = (π₂ − p²) / (p(1 − p))` with
//! `p = π₁`.
//!
//! Two routes lead to the distribution of `S`:
//!
//! * non-parametric: the empirical measure of the predicted probabilities
//!   `q_i` plays the role of the mixing law ([`empirical_count_pmf`], stable
//!   for any `d`), or the alternating sum over the sample moments
//!   ([`count_pmf_from_moments`], capped at `d ≤ 30`);
//! * parametric: `Q ~ Beta(a, b)` fitted by moments, giving a beta-binomial
//!   count ([`beta_binomial_pmf`]).

mod beta;
mod count;
mod divergence;

pub use beta::{beta_binomial_pmf, beta_cdf, beta_fit_moments, beta_moment, beta_moments, BetaParams};
pub use count::{
    count_pmf_from_moments, empirical_count_pmf, loss_fraction, var_alpha, CountDistribution, DistributionSource,
    LossDistribution, MAX_MOMENT_PMF_DIM,
};
pub use divergence::{kl_divergence, kolmogorov_survival, ks_test, KsResult};

use serde::{Deserialize, Serialize};

use crate::classifiers::MixingSample;
use count::DoubleDouble;
use crate::error::{Error, Result};

/// Sample cross moments `π̂_1 ≥ π̂_2 ≥ … ≥ π̂_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    /// `pi[k-1]` holds `π_k`.
    pub pi: Vec<f64>,
    /// Low-order parts: `π_k ≈ pi[k-1] + pi_lo[k-1]` to about 32 digits.
    /// Empty when only the rounded values are known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pi_lo: Vec<f64>,
    pub n_source: usize,
}

impl MomentVector {
    pub fn new(pi: Vec<f64>, n_source: usize) -> Self {
        Self {
            pi,
            pi_lo: Vec::new(),
            n_source,
        }
    }

    pub(crate) fn from_extended(parts: Vec<DoubleDouble>, n_source: usize) -> Self {
        let (pi, pi_lo) = parts.iter().map(|p| p.parts()).unzip();
        Self { pi, pi_lo, n_source }
    }

    /// `π_k` as a (rounded value, residual) pair.
    pub fn get_extended(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            (1.0, 0.0)
        } else {
            (self.pi[k - 1], self.pi_lo.get(k - 1).copied().unwrap_or(0.0))
        }
    }

    pub fn order(&self) -> usize {
        self.pi.len()
    }

    /// `π_k`, with `π_0 = 1`.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.pi[k - 1]
        }
    }

    pub fn p(&self) -> f64 {
        self.pi[0]
    }
}

/// `π̂_k = (1/n) Σ q_i^k` for `k = 1..=order`.
pub fn sample_moments(q: &MixingSample, order: usize) -> Result<MomentVector> {
    moments_of(&q.q, order)
}

pub(crate) fn moments_of(q: &[f64], order: usize) -> Result<MomentVector> {
    if q.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if order == 0 {
        return Err(Error::InvalidArgument("moment order must be at least 1".into()));
    }
    // powers and sums in double-double so each moment is close to correctly
    // rounded; the alternating moment sum magnifies every ulp
    let n = q.len() as f64;
    let mut sums = vec![DoubleDouble::default(); order];
    for (v, count) in count::distinct_with_counts(q) {
        let mut power = DoubleDouble::new(1.0);
        for s in sums.iter_mut() {
            power = power.mul(v);
            s.add(power.mul(count));
        }
    }
    let parts = sums.into_iter().map(|s| s.div_dd(DoubleDouble::new(n))).collect();
    Ok(MomentVector::from_extended(parts, q.len()))
}

/// Slack allowed on `p² ≤ π₂ ≤ p` for moments that carry rounding error.
const MOMENT_SLACK: f64 = 1e-12;

/// `ρ = (π₂ − p²) / (p(1 − p))`.
pub fn default_correlation(p: f64, pi2: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("marginal default probability {p} must lie in (0,1)")));
    }
    if pi2 < p * p - MOMENT_SLACK || pi2 > p + MOMENT_SLACK {
        return Err(Error::InvalidArgument(format!(
            "second moment {pi2} outside [p², p] = [{}, {p}]",
            p * p
        )));
    }
    Ok(((pi2 - p * p) / (p * (1.0 - p))).clamp(0.0, 1.0))
}
