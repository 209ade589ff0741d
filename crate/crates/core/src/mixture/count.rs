use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::MomentVector;
use crate::classifiers::MixingSample;
use crate::error::{Error, Result};

/// Largest portfolio for which the alternating moment sum is evaluated.
pub const MAX_MOMENT_PMF_DIM: usize = 30;

/// Entries this far below zero are rounding noise and clamp to 0.
const CLAMP_NEGATIVE: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-10;
/// Looser limits for the alternating moment sum.
const MOMENT_SUM_NEGATIVE: f64 = 1e-6;
const MOMENT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionSource {
    Nonparametric,
    BetaBinomial,
}

impl DistributionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionSource::Nonparametric => "nonparam",
            DistributionSource::BetaBinomial => "beta",
        }
    }
}

impl std::str::FromStr for DistributionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonparam" | "nonparametric" | "empirical" => Ok(DistributionSource::Nonparametric),
            "beta" | "beta-binomial" => Ok(DistributionSource::BetaBinomial),
            other => Err(Error::InvalidArgument(format!("unknown distribution `{other}` (expected nonparam|beta)"))),
        }
    }
}

/// Probability mass function of the number of defaults on `{0, …, d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    d: usize,
    pmf: Vec<f64>,
    source: DistributionSource,
}

impl CountDistribution {
    /// Validates a raw pmf. Entries down to `−1e-12` clamp to 0, then the
    /// vector is renormalized if its sum is within `1e-10` of 1.
    pub fn new(pmf: Vec<f64>, source: DistributionSource) -> Result<Self> {
        Self::with_tolerances(pmf, source, CLAMP_NEGATIVE, SUM_TOLERANCE)
    }

    fn with_tolerances(mut pmf: Vec<f64>, source: DistributionSource, negative: f64, sum_tol: f64) -> Result<Self> {
        if pmf.len() < 2 {
            return Err(Error::InvalidArgument("a count pmf needs d >= 1".into()));
        }
        if let Some((k, v)) = pmf.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < -negative) {
            return Err(Error::Numerical(format!("pmf entry {k} is {v:e}")));
        }
        pmf.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > sum_tol {
            return Err(Error::Numerical(format!("pmf sums to {total} (|Σ−1| = {:e})", (total - 1.0).abs())));
        }
        pmf.iter_mut().for_each(|v| *v /= total);
        Ok(Self {
            d: pmf.len() - 1,
            pmf,
            source,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn source(&self) -> DistributionSource {
        self.source
    }

    pub fn point_mass(d: usize, at: usize) -> Result<Self> {
        if at > d {
            return Err(Error::InvalidArgument(format!("mass point {at} outside 0..={d}")));
        }
        let mut pmf = vec![0.0; d + 1];
        pmf[at] = 1.0;
        Self::new(pmf, DistributionSource::Nonparametric)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.pmf.iter().enumerate().map(|(k, p)| (k as f64 - mu).powi(2) * p).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        self.pmf
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// CSV with header `k,probability` and `d + 1` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "k,probability").map_err(io)?;
        for (k, p) in self.pmf.iter().enumerate() {
            writeln!(w, "{k},{p}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>, source: DistributionSource) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let mut pmf = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let k: usize = rec.get(0).unwrap_or("").parse().map_err(|_| Error::BadCell {
                row,
                column: "k".into(),
                reason: "not a count".into(),
            })?;
            if k != row {
                return Err(Error::BadCell {
                    row,
                    column: "k".into(),
                    reason: format!("expected k = {row}"),
                });
            }
            let p: f64 = rec.get(1).unwrap_or("").parse().map_err(|_| Error::BadCell {
                row,
                column: "probability".into(),
                reason: "not a number".into(),
            })?;
            pmf.push(p);
        }
        Self::new(pmf, source)
    }
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Distinct values of `q` with their multiplicities.
pub(crate) fn distinct_with_counts(q: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == v => *c += 1.0,
            _ => out.push((v, 1.0)),
        }
    }
    out
}

/// `P(S = k) = C(d,k) · (1/n) Σ_i q_i^k (1 − q_i)^{d−k}`, every term in log
/// space. Stable for any `d`.
pub fn empirical_count_pmf(q: &MixingSample, d: usize) -> Result<CountDistribution> {
    empirical_pmf_of(&q.q, d)
}

pub(crate) fn empirical_pmf_of(q: &[f64], d: usize) -> Result<CountDistribution> {
    if d == 0 {
        return Err(Error::InvalidArgument("portfolio size d must be at least 1".into()));
    }
    if q.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let atoms = distinct_with_counts(q);
    let n = q.len() as f64;
    let logs: Vec<(f64, f64, f64)> = atoms.iter().map(|&(v, c)| (v.ln(), (-v).ln_1p(), c)).collect();
    let pmf: Vec<f64> = (0..=d)
        .into_par_iter()
        .map(|k| {
            let lc = ln_choose(d, k);
            let mut sum = 0.0;
            let mut comp = 0.0;
            for (&(v, _), &(lq, l1q, c)) in atoms.iter().zip(&logs) {
                let term = if v == 0.0 {
                    if k == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if v == 1.0 {
                    if k == d {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (lc + k as f64 * lq + (d - k) as f64 * l1q).exp()
                };
                // Kahan-Babuska summation
                let x = c * term;
                let t = sum + x;
                comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
                sum = t;
            }
            (sum + comp) / n
        })
        .collect();
    CountDistribution::new(pmf, DistributionSource::Nonparametric)
}

/// Binomial coefficients `C(n, k)` for `n ≤ d`, exact in integers.
fn pascal(d: usize) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = vec![vec![1]];
    for n in 1..=d {
        let prev = &rows[n - 1];
        let mut row = vec![1u64; n + 1];
        for k in 1..n {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

/// Double-double number: error-free products (via fused multiply-add) and
/// sums carried in a (hi, lo) pair.
#[derive(Default, Clone, Copy)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub(crate) fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn renormalized(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    pub(crate) fn parts(&self) -> (f64, f64) {
        (self.hi, self.lo)
    }

    /// Exact sum of two doubles.
    pub(crate) fn sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    pub(crate) fn add(&mut self, other: DoubleDouble) {
        let s = self.hi + other.hi;
        let bb = s - self.hi;
        let se = (self.hi - (s - bb)) + (other.hi - bb);
        *self = Self::renormalized(s, se + self.lo + other.lo);
    }

    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(Self { hi: p, lo: a.mul_add(b, -p) });
    }

    pub(crate) fn mul(self, b: f64) -> Self {
        let p = self.hi * b;
        Self::renormalized(p, self.hi.mul_add(b, -p) + self.lo * b)
    }

    pub(crate) fn mul_dd(self, b: DoubleDouble) -> Self {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p) + (self.hi * b.lo + self.lo * b.hi);
        Self::renormalized(p, e)
    }

    pub(crate) fn div_dd(self, b: DoubleDouble) -> Self {
        let q1 = self.hi / b.hi;
        let mut r = self;
        r.add(b.mul(-q1));
        Self::renormalized(q1, r.hi / b.hi)
    }

    pub(crate) fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `P(S = k) = Σ_{i=0}^{d−k} (−1)^i d!/(i! k! (d−k−i)!) π_{k+i}`.
///
/// The alternating sum cancels catastrophically as `d` grows, so it is
/// evaluated with exact integer coefficients and double-double accumulation,
/// and refused above [`MAX_MOMENT_PMF_DIM`]. The result is renormalized only
/// when `|Σ − 1| ≤ 1e-6` and no entry falls below `−1e-6`.
pub fn count_pmf_from_moments(m: &MomentVector, d: usize) -> Result<CountDistribution> {
    if d == 0 {
        return Err(Error::InvalidArgument("portfolio size d must be at least 1".into()));
    }
    if d > MAX_MOMENT_PMF_DIM {
        return Err(Error::InvalidArgument(format!(
            "d = {d} exceeds {MAX_MOMENT_PMF_DIM}, where the alternating moment sum loses all precision; use the empirical mixture"
        )));
    }
    if m.order() < d {
        return Err(Error::InvalidArgument(format!("need moments up to order {d}, have {}", m.order())));
    }
    let binom = pascal(d);
    let pmf: Vec<f64> = (0..=d)
        .map(|k| {
            let mut acc = DoubleDouble::default();
            for i in 0..=(d - k) {
                // d!/(i! k! (d−k−i)!) = C(d,k)·C(d−k,i) < 3^30 < 2^53
                let coef = (binom[d][k] * binom[d - k][i]) as f64;
                let signed = if i % 2 == 0 { coef } else { -coef };
                let (hi, lo) = m.get_extended(k + i);
                acc.add_product(signed, hi);
                acc.add_product(signed, lo);
            }
            acc.value()
        })
        .collect();
    CountDistribution::with_tolerances(
        pmf,
        DistributionSource::Nonparametric,
        MOMENT_SUM_NEGATIVE,
        MOMENT_SUM_TOLERANCE,
    )
}

/// Smallest `k` with `P(S ≤ k) ≥ α`.
pub fn var_alpha(dist: &CountDistribution, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0,1)")));
    }
    let mut acc = 0.0;
    for (k, p) in dist.pmf().iter().enumerate() {
        acc += p;
        if acc >= alpha {
            return Ok(k);
        }
    }
    Ok(dist.d())
}

/// Distribution of the portfolio loss fraction `L = S/d` under equal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub counts: CountDistribution,
}

impl LossDistribution {
    pub fn support(&self) -> Vec<f64> {
        let d = self.counts.d() as f64;
        (0..=self.counts.d()).map(|k| k as f64 / d).collect()
    }

    pub fn pmf(&self) -> &[f64] {
        self.counts.pmf()
    }

    pub fn mean(&self) -> f64 {
        self.counts.mean() / self.counts.d() as f64
    }

    pub fn var_alpha(&self, alpha: f64) -> Result<f64> {
        Ok(var_alpha(&self.counts, alpha)? as f64 / self.counts.d() as f64)
    }
}

pub fn loss_fraction(dist: &CountDistribution) -> LossDistribution {
    LossDistribution { counts: dist.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::moments_of;

    #[test]
    fn all_zero_sample_is_point_mass_at_zero() {
        let pmf = empirical_pmf_of(&[0.0; 4], 6).unwrap();
        assert_eq!(pmf.pmf()[0], 1.0);
        assert!(pmf.pmf()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_half_is_binomial() {
        let pmf = empirical_pmf_of(&[0.5], 2).unwrap();
        for (got, want) in pmf.pmf().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn moment_route_small_cases() {
        let m = moments_of(&[0.5], 2).unwrap();
        let pmf = count_pmf_from_moments(&m, 2).unwrap();
        for (got, want) in pmf.pmf().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
        // uniform mixing: π_k = 1/(k+1)
        let uniform = MomentVector::new((1..=3).map(|k| 1.0 / (k as f64 + 1.0)).collect(), 0);
        let pmf = count_pmf_from_moments(&uniform, 3).unwrap();
        assert!(pmf.pmf().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn moment_route_refuses_large_d() {
        let m = moments_of(&[0.2, 0.3], 40).unwrap();
        assert!(count_pmf_from_moments(&m, 31).is_err());
        assert!(count_pmf_from_moments(&m, 30).is_ok());
        let short = moments_of(&[0.2], 3).unwrap();
        assert!(count_pmf_from_moments(&short, 4).is_err());
    }

    #[test]
    fn garbage_moments_detected() {
        // not a moment sequence: huge alternating sum error
        let bad = MomentVector::new(vec![0.9, 0.1, 0.8, 0.05, 0.7], 0);
        assert!(matches!(count_pmf_from_moments(&bad, 5), Err(Error::Numerical(_))));
    }

    #[test]
    fn var_of_point_mass() {
        let dist = CountDistribution::point_mass(20, 7).unwrap();
        for alpha in [0.01, 0.5, 0.9, 0.999] {
            assert_eq!(var_alpha(&dist, alpha).unwrap(), 7);
        }
        assert!(var_alpha(&dist, 1.0).is_err());
        assert!(var_alpha(&dist, 0.0).is_err());
    }

    #[test]
    fn var_is_generalized_inverse() {
        let dist = CountDistribution::new(vec![0.25, 0.25, 0.25, 0.25], DistributionSource::Nonparametric).unwrap();
        assert_eq!(var_alpha(&dist, 0.25).unwrap(), 0);
        assert_eq!(var_alpha(&dist, 0.26).unwrap(), 1);
        assert_eq!(var_alpha(&dist, 0.5).unwrap(), 1);
        assert_eq!(var_alpha(&dist, 0.99).unwrap(), 3);
    }

    #[test]
    fn loss_fraction_rescales() {
        let dist = CountDistribution::point_mass(25, 0).unwrap();
        let loss = loss_fraction(&dist);
        assert_eq!(loss.mean(), 0.0);
        assert_eq!(loss.var_alpha(0.99).unwrap(), 0.0);
        let dist = CountDistribution::point_mass(25, 18).unwrap();
        assert!((loss_fraction(&dist).var_alpha(0.99).unwrap() - 0.72).abs() < 1e-15);
    }

    #[test]
    fn validation_rules() {
        assert!(CountDistribution::new(vec![1.0 + 1e-13, -1e-13], DistributionSource::Nonparametric).is_ok());
        assert!(CountDistribution::new(vec![1.1, -0.1], DistributionSource::Nonparametric).is_err());
        assert!(CountDistribution::new(vec![0.5, 0.4], DistributionSource::Nonparametric).is_err());
        assert!(CountDistribution::new(vec![1.0], DistributionSource::Nonparametric).is_err());
    }

    #[test]
    fn export_rejects_empty_path() {
        let dist = CountDistribution::point_mass(2, 1).unwrap();
        assert!(dist.write_csv("").is_err());
    }
}
