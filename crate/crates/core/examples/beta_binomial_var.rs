//! VaR of the number of defaults when the mixing variable is beta.
//!
//! `cargo run --example beta_binomial_var -- 2.42 6.78 25`

use credit_mixture::mixture::{beta_binomial_pmf, loss_fraction, var_alpha, BetaParams};

fn main() -> credit_mixture::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parse = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let params = BetaParams::new(parse(0, 2.42), parse(1, 6.78))?;
    let sizes: Vec<usize> = match args.get(2) {
        Some(d) => vec![d.parse().expect("portfolio size")],
        None => vec![25, 100, 6000],
    };
    println!("beta({}, {}): p = {:.4}, rho = {:.4}", params.a, params.b, params.p(), params.rho());
    for d in sizes {
        let pmf = beta_binomial_pmf(&params, d)?;
        let loss = loss_fraction(&pmf);
        println!("d = {d}: mean defaults {:.2}, sd {:.2}", pmf.mean(), pmf.variance().sqrt());
        for alpha in [0.90, 0.95, 0.99] {
            println!("  VaR {alpha:.2}: {} defaults, loss fraction {:.4}", var_alpha(&pmf, alpha)?, loss.var_alpha(alpha)?);
        }
    }
    Ok(())
}
