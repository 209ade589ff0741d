use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

use super::count::{ln_choose, CountDistribution, DistributionSource, DoubleDouble};
use super::{default_correlation, MomentVector};
use crate::error::{Error, Result};

/// Shape parameters of a beta mixing law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// Parameters with mean `p` and default correlation `ρ`:
    /// `a + b = 1/ρ − 1`, `a = p(a + b)`.
    pub fn from_mean_correlation(p: f64, rho: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} must lie in (0,1)")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "default correlation {rho} must lie strictly inside (0,1) for a beta fit"
            )));
        }
        let total = 1.0 / rho - 1.0;
        Self::new(p * total, (1.0 - p) * total)
    }

    /// Mean `a / (a + b)`.
    pub fn p(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// Default correlation `1 / (a + b + 1)`.
    pub fn rho(&self) -> f64 {
        1.0 / (self.a + self.b + 1.0)
    }
}

/// Method-of-moments beta fit from `(p, π₂)`; requires `p² < π₂ < p`.
pub fn beta_fit_moments(p: f64, pi2: f64) -> Result<BetaParams> {
    if !(pi2 > p * p && pi2 < p) {
        return Err(Error::InvalidArgument(format!(
            "need p² < π₂ < p for a beta fit, got p = {p}, π₂ = {pi2}"
        )));
    }
    BetaParams::from_mean_correlation(p, default_correlation(p, pi2)?)
}

/// `π_k = Π_{j=0}^{k−1} (a + j) / (a + b + j)`.
pub fn beta_moment(params: &BetaParams, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (params.a + j as f64) / (params.a + params.b + j as f64))
}

/// All moments up to `order`, carried in double-double so they can feed the
/// alternating moment sum without losing digits.
pub fn beta_moments(params: &BetaParams, order: usize) -> MomentVector {
    let total = DoubleDouble::sum(params.a, params.b);
    let mut parts = Vec::with_capacity(order);
    let mut acc = DoubleDouble::new(1.0);
    for j in 0..order {
        let num = DoubleDouble::sum(params.a, j as f64);
        let mut den = total;
        den.add(DoubleDouble::new(j as f64));
        acc = acc.mul_dd(num.div_dd(den));
        parts.push(acc);
    }
    MomentVector::from_extended(parts, 0)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_cdf(params: &BetaParams, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(params.a, params.b, x)
    }
}

/// `P(S = k) = C(d,k) B(a + k, b + d − k) / B(a, b)`, all in log-gamma.
pub fn beta_binomial_pmf(params: &BetaParams, d: usize) -> Result<CountDistribution> {
    if d == 0 {
        return Err(Error::InvalidArgument("portfolio size d must be at least 1".into()));
    }
    let BetaParams { a, b } = *params;
    let ln_norm = ln_beta(a, b) + ln_gamma(a + b + d as f64);
    let pmf: Vec<f64> = (0..=d)
        .into_par_iter()
        .map(|k| {
            let kf = k as f64;
            (ln_choose(d, k) + ln_gamma(a + kf) + ln_gamma(b + (d - k) as f64) - ln_norm).exp()
        })
        .collect();
    CountDistribution::new(pmf, DistributionSource::BetaBinomial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_beta() {
        let p = beta_fit_moments(0.5, 0.5 * (0.5 + 1.0 / 3.0 * 0.5)).unwrap();
        assert!((p.a - 1.0).abs() < 1e-12 && (p.b - 1.0).abs() < 1e-12, "{p:?}");
        let u = BetaParams::new(1.0, 1.0).unwrap();
        assert!((beta_moment(&u, 3) - 0.25).abs() < 1e-15);
        let pmf = beta_binomial_pmf(&u, 9).unwrap();
        assert!(pmf.pmf().iter().all(|&v| (v - 0.1).abs() < 1e-13));
    }

    #[test]
    fn first_moment_and_single_obligor() {
        let p = BetaParams::new(2.42, 6.78).unwrap();
        assert!((beta_moment(&p, 1) - p.p()).abs() < 1e-16);
        let pmf = beta_binomial_pmf(&p, 1).unwrap();
        assert!((pmf.pmf()[1] - 2.42 / 9.2).abs() < 1e-13);
    }

    #[test]
    fn second_moment_consistent_with_correlation() {
        let p = BetaParams::new(2.42, 6.78).unwrap();
        let pi2 = beta_moment(&p, 2);
        assert!((pi2 - p.p() * 3.42 / 10.2).abs() < 1e-15);
        assert!((pi2 - 0.08820).abs() < 5e-6, "{pi2}");
        let rho = default_correlation(p.p(), pi2).unwrap();
        assert!((rho - p.rho()).abs() < 1e-12);
        assert!((rho - 0.0980).abs() < 5e-5);
    }

    #[test]
    fn boundary_correlation_rejected() {
        assert!(beta_fit_moments(0.3, 0.09).is_err());
        assert!(beta_fit_moments(0.3, 0.3).is_err());
        assert!(BetaParams::from_mean_correlation(0.3, 0.0).is_err());
    }

    #[test]
    fn cdf_limits() {
        let p = BetaParams::new(2.0, 3.0).unwrap();
        assert_eq!(beta_cdf(&p, -1.0), 0.0);
        assert_eq!(beta_cdf(&p, 1.0), 1.0);
        // I_x(2,3) = 6x² − 8x³ + 3x⁴
        let x: f64 = 0.3;
        assert!((beta_cdf(&p, x) - (6.0 * x * x - 8.0 * x.powi(3) + 3.0 * x.powi(4))).abs() < 1e-14);
    }
}
