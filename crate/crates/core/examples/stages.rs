//! Driving the pipeline one stage at a time, then rebuilding a VaR from
//! the persisted artifacts alone.

use credit_mixture::classifiers::ModelTag;
use credit_mixture::mixture::{var_alpha, DistributionSource};
use credit_mixture::pipeline::{Run, RunConfig, SyntheticData};

fn main() -> credit_mixture::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.data.synthetic = Some(SyntheticData { rows: 3000, seed: 9 });
    cfg.models.rf.n_trees = 30;
    cfg.models.ab.n_rounds = 30;
    cfg.output_dir = std::env::temp_dir().join("creditmix-stages");
    let run = Run::new(cfg)?;

    let data = run.ingest()?;
    let tags = [ModelTag::Lr, ModelTag::Rf];
    run.fit(&data, &tags)?;
    for (tag, c) in run.calibrate(&data, &tags)? {
        println!("{tag}: {} (platt {:.4}, isotonic {:.4})", c.method, c.platt_ece, c.isotonic_ece);
    }
    run.evaluate(&data, &tags)?;
    for s in run.mixture(&tags)? {
        println!("{}: p = {:.4}, rho = {:?}", s.tag, s.p, s.rho);
    }

    // a separate handle on the same directory sees only the files
    let later = Run::new(run.config.clone())?;
    for tag in tags {
        let pmf = later.distribution(tag, DistributionSource::BetaBinomial, 6000)?;
        println!("{tag} beta VaR 0.99 at d = 6000: {}", var_alpha(&pmf, 0.99)?);
    }
    Ok(())
}
