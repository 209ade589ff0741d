//! Degenerate mixing variables: when every obligor has the same default
//! probability the defaults are independent and the count is binomial.

use credit_mixture::classifiers::{MixingSample, ModelTag};
use credit_mixture::mixture::{empirical_count_pmf, sample_moments, var_alpha};

fn main() -> credit_mixture::Result<()> {
    for q in [0.0, 0.2, 1.0] {
        let sample = MixingSample::new(vec![q; 100], ModelTag::Lr)?;
        let pmf = empirical_count_pmf(&sample, 25)?;
        let m = sample_moments(&sample, 2)?;
        let pi2 = m.get(2);
        println!(
            "q = {q}: pi2 - p^2 = {:.1e}, VaR 0.99 = {}, mean = {:.2}",
            pi2 - m.p() * m.p(),
            var_alpha(&pmf, 0.99)?,
            pmf.mean()
        );
    }
    Ok(())
}
