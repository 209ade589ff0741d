//! The empirical mixture: moments, default correlation, the pmf of the
//! number of defaults, and how far a fitted beta is from it.

use credit_mixture::classifiers::{MixingSample, ModelTag};
use credit_mixture::mixture::{
    beta_binomial_pmf, beta_fit_moments, count_pmf_from_moments, default_correlation, empirical_count_pmf,
    kl_divergence, ks_test, sample_moments, var_alpha,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> credit_mixture::Result<()> {
    // a two-point mixture of obligor probabilities plus noise, clipped to [0, 1]
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q: Vec<f64> = (0..5000)
        .map(|_| {
            let centre = if rng.random::<f64>() < 0.7 { 0.1 } else { 0.55 };
            (centre + 0.08 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
        })
        .collect();
    let sample = MixingSample::new(q, ModelTag::Rf)?;

    let d = 25;
    let moments = sample_moments(&sample, d)?;
    let (p, pi2) = (moments.p(), moments.get(2));
    println!("p = {p:.4}, pi2 = {pi2:.4}, rho = {:.4}", default_correlation(p, pi2)?);

    let pmf = empirical_count_pmf(&sample, d)?;
    let via_moments = count_pmf_from_moments(&moments, d)?;
    let gap = pmf.pmf().iter().zip(via_moments.pmf()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest gap between the direct pmf and the moment route: {gap:.1e}");

    let beta = beta_fit_moments(p, pi2)?;
    let fitted = beta_binomial_pmf(&beta, d)?;
    println!("beta fit ({:.3}, {:.3}), KL(non-parametric || beta) = {:.4}", beta.a, beta.b, kl_divergence(&pmf, &fitted)?);
    let ks = ks_test(&sample, &beta)?;
    println!("KS statistic {:.4}, p-value {:.2e}", ks.statistic, ks.p_value);

    println!("   k  non-parametric  beta-binomial");
    for k in 0..=d {
        println!("{k:>4}  {:>14.6}  {:>13.6}", pmf.pmf()[k], fitted.pmf()[k]);
    }
    for alpha in [0.90, 0.95, 0.99] {
        println!("VaR {alpha:.2}: non-parametric {}, beta {}", var_alpha(&pmf, alpha)?, var_alpha(&fitted, alpha)?);
    }
    Ok(())
}
