use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use credit_mixture::classifiers::ModelTag;
use credit_mixture::mixture::{var_alpha, CountDistribution, DistributionSource};
use credit_mixture::pipeline::{export_pmf, Run, RunConfig};
use credit_mixture::Result;

/// Default probabilities from four classifiers, fed into an exchangeable
/// Bernoulli mixture for portfolio VaR.
#[derive(Parser)]
#[command(name = "creditmix", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    /// Overrides both the split seed and the model seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Data file; overrides `data.path` from the config.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every stage, from ingest to report.
    Run,
    /// Split the data and fit classifiers.
    Fit {
        #[arg(long, value_parser = parse_tag)]
        model: Option<ModelTag>,
    },
    /// Choose Platt or isotonic calibration for RF, AB and KNN.
    Calibrate {
        #[arg(long, value_parser = parse_tag)]
        model: Option<ModelTag>,
    },
    /// Score the test set: mixing samples, metrics, ROC points.
    Evaluate {
        #[arg(long, value_parser = parse_tag)]
        model: Option<ModelTag>,
    },
    /// Moments, correlation, beta fit, pmfs, KL and KS.
    Mixture {
        #[arg(long, value_parser = parse_tag)]
        model: Option<ModelTag>,
    },
    /// VaR of the number of defaults. Without `--alpha`/`--d`/`--dist`, the
    /// configured table is computed and written.
    Var {
        #[arg(long, value_parser = parse_tag)]
        model: Option<ModelTag>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        d: Vec<usize>,
        #[arg(long, value_parser = parse_source)]
        dist: Option<DistributionSource>,
        /// Read the pmf from a `k,probability` CSV instead of the run.
        #[arg(long)]
        pmf: Option<PathBuf>,
    },
    /// Write one model's count pmf as `k,probability` CSV.
    ExportPmf {
        #[arg(long, value_parser = parse_tag)]
        model: ModelTag,
        #[arg(long)]
        d: usize,
        #[arg(long, value_parser = parse_source)]
        dist: DistributionSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble report.txt and report_tables.txt from the run artifacts.
    Report,
}

fn parse_tag(s: &str) -> std::result::Result<ModelTag, String> {
    s.parse().map_err(|e: credit_mixture::Error| e.to_string())
}

fn parse_source(s: &str) -> std::result::Result<DistributionSource, String> {
    s.parse().map_err(|e: credit_mixture::Error| e.to_string())
}

fn tags(model: Option<ModelTag>) -> Vec<ModelTag> {
    model.map_or_else(|| ModelTag::ALL.to_vec(), |t| vec![t])
}

fn build_run(cli: &Cli) -> Result<Run> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| credit_mixture::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            toml::from_str::<RunConfig>(&text).map_err(|e| credit_mixture::Error::Config(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(data) = &cli.data {
        cfg.data.path = Some(data.clone());
        cfg.data.synthetic = None;
    }
    if let Some(dir) = &cli.run_dir {
        cfg.output_dir = dir.clone();
    }
    Run::new(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::Var { pmf: Some(path), alpha, .. } = &cli.command {
        let dist = CountDistribution::read_csv(path, DistributionSource::Nonparametric)?;
        let alphas = if alpha.is_empty() { vec![0.90, 0.95, 0.99] } else { alpha.clone() };
        for a in alphas {
            println!("alpha={a} d={} var={}", dist.d(), var_alpha(&dist, a)?);
        }
        return Ok(());
    }
    let run = build_run(&cli)?;
    match cli.command {
        Command::Run => {
            let report = run.run_all()?;
            print!("{}", report.tables());
            println!("report written to {}", run.layout.report_text().display());
        }
        Command::Fit { model } => {
            let data = run.ingest()?;
            for m in run.fit(&data, &tags(model))? {
                println!("fitted {} -> {}", m.tag(), run.layout.model(m.tag()).display());
            }
        }
        Command::Calibrate { model } => {
            let data = run.ingest()?;
            for (tag, c) in run.calibrate(&data, &tags(model))? {
                println!(
                    "{tag}: method={} platt_ece={} isotonic_ece={}",
                    c.method, c.platt_ece, c.isotonic_ece
                );
            }
        }
        Command::Evaluate { model } => {
            let data = run.ingest()?;
            for (tag, r) in run.evaluate(&data, &tags(model))? {
                println!(
                    "{tag}: precision={:.4} recall={:.4} f1={:.4} auc={:.4}",
                    r.positive.precision, r.positive.recall, r.positive.f1, r.auc
                );
            }
        }
        Command::Mixture { model } => {
            for s in run.mixture(&tags(model))? {
                let rho = s.rho.map_or("none".into(), |r| r.to_string());
                let beta = s.beta.map_or("none".into(), |b| format!("({}, {})", b.a, b.b));
                println!("{}: p={} pi2={} rho={rho} beta={beta}", s.tag, s.p, s.pi2);
            }
        }
        Command::Var {
            model, alpha, d, dist, ..
        } => {
            if alpha.is_empty() && d.is_empty() && dist.is_none() {
                for e in run.var(&tags(model))? {
                    println!(
                        "{} {} d={} alpha={} var={} loss_fraction={}",
                        e.model,
                        e.source.as_str(),
                        e.d,
                        e.alpha,
                        e.count,
                        e.loss_fraction
                    );
                }
            } else {
                let alphas = if alpha.is_empty() { run.config.alphas.clone() } else { alpha };
                let sizes = if d.is_empty() { run.config.portfolio_sizes.clone() } else { d };
                let sources = dist.map_or_else(
                    || vec![DistributionSource::Nonparametric, DistributionSource::BetaBinomial],
                    |s| vec![s],
                );
                for tag in tags(model) {
                    for &size in &sizes {
                        for &source in &sources {
                            let pmf = run.distribution(tag, source, size)?;
                            for &a in &alphas {
                                println!(
                                    "{tag} {} d={size} alpha={a} var={}",
                                    source.as_str(),
                                    var_alpha(&pmf, a)?
                                );
                            }
                        }
                    }
                }
            }
        }
        Command::ExportPmf { model, d, dist, out } => {
            let pmf = run.distribution(model, dist, d)?;
            export_pmf(&pmf, &out)?;
            println!("wrote {} rows to {}", pmf.d() + 1, out.display());
        }
        Command::Report => {
            let report = run.report()?;
            print!("{}", report.tables());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
