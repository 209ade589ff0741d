//! End-to-end run: ingest, split, fit the four classifiers, calibrate the
//! machine-learning ones, score the test set, then build the mixture
//! distributions and their Value-at-Risk.
//!
//! Every stage reads its inputs from and writes its outputs to a run
//! directory, so stages can be invoked one at a time:
//!
//! ```text
//! <run>/config.toml              resolved configuration
//! <run>/dataset.json             sizes and class balance of each partition
//! <run>/correlation.csv          covariate and label correlation matrix
//! <run>/standardizer.json
//! <run>/models/<tag>.json        fitted classifier
//! <run>/calibration/<tag>.json   chosen calibration map and both ECEs
//! <run>/reliability/<tag>.csv    validation reliability bins after calibration
//! <run>/metrics/<tag>.json       test-set classification report
//! <run>/roc/<tag>.csv            test-set ROC points
//! <run>/samples/<tag>.csv        mixing sample (one predicted probability per test row)
//! <run>/mixture/<tag>.json       moments, correlation, beta fit, KL, KS
//! <run>/pmf/<tag>_<source>_d<d>.csv
//! <run>/var.csv, <run>/var.json  VaR table
//! <run>/report.txt               machine-readable key = value report
//! <run>/report_tables.txt        aligned human-readable tables
//! <run>/report.json
//! ```

mod config;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{DataConfig, RunConfig, SchemaConfig, SyntheticData};
pub use report::{compare_models, ModelComparison, ModelReport, Relation, RunReport, REPORT_FORMAT_VERSION};

use crate::calibration::{calibrate, reliability_bins, CalibrationChoice, CalibrationMap};
use crate::classifiers::{fit_model, load_model, save_model, FittedModel, MixingSample, ModelTag};
use crate::dataset::{
    self, apply_standardizer, calibration_split, correlation_matrix, fit_standardizer, train_test_split, LabeledSample,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::metrics::{classification_report, roc_curve, ClassificationReport, DEFAULT_THRESHOLD};
use crate::mixture::{
    beta_binomial_pmf, beta_fit_moments, count_pmf_from_moments, default_correlation, empirical_count_pmf,
    kl_divergence, ks_test, sample_moments, var_alpha, BetaParams, CountDistribution, DistributionSource, KsResult,
    MAX_MOMENT_PMF_DIM,
};

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.json")
    }

    pub fn correlation(&self) -> PathBuf {
        self.root.join("correlation.csv")
    }

    pub fn standardizer(&self) -> PathBuf {
        self.root.join("standardizer.json")
    }

    pub fn model(&self, tag: ModelTag) -> PathBuf {
        self.root.join("models").join(format!("{}.json", tag.as_str()))
    }

    pub fn calibration(&self, tag: ModelTag) -> PathBuf {
        self.root.join("calibration").join(format!("{}.json", tag.as_str()))
    }

    pub fn reliability(&self, tag: ModelTag) -> PathBuf {
        self.root.join("reliability").join(format!("{}.csv", tag.as_str()))
    }

    pub fn metrics(&self, tag: ModelTag) -> PathBuf {
        self.root.join("metrics").join(format!("{}.json", tag.as_str()))
    }

    pub fn roc(&self, tag: ModelTag) -> PathBuf {
        self.root.join("roc").join(format!("{}.csv", tag.as_str()))
    }

    pub fn sample(&self, tag: ModelTag) -> PathBuf {
        self.root.join("samples").join(format!("{}.csv", tag.as_str()))
    }

    pub fn mixture(&self, tag: ModelTag) -> PathBuf {
        self.root.join("mixture").join(format!("{}.json", tag.as_str()))
    }

    pub fn pmf(&self, tag: ModelTag, source: DistributionSource, d: usize) -> PathBuf {
        self.root
            .join("pmf")
            .join(format!("{}_{}_d{d}.csv", tag.as_str(), source.as_str()))
    }

    pub fn var_csv(&self) -> PathBuf {
        self.root.join("var.csv")
    }

    pub fn var_json(&self) -> PathBuf {
        self.root.join("var.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn report_tables(&self) -> PathBuf {
        self.root.join("report_tables.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_artifact(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn read_artifact(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact(path.to_path_buf())),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Writes a pmf as CSV `k,probability` with `d + 1` rows.
pub fn export_pmf(dist: &CountDistribution, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidArgument("empty output path".into()));
    }
    ensure_parent(path)?;
    dist.write_csv(path)
}

/// One predicted probability per line under the header `q`.
pub fn write_sample(path: impl AsRef<Path>, sample: &MixingSample) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "q").map_err(io)?;
    for q in &sample.q {
        writeln!(w, "{q}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_sample(path: impl AsRef<Path>, tag: ModelTag) -> Result<MixingSample> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut q = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec.get(0).unwrap_or("").parse().map_err(|_| Error::BadCell {
            row,
            column: "q".into(),
            reason: "not a number".into(),
        })?;
        q.push(v);
    }
    MixingSample::new(q, tag)
}

/// Sizes and class balance of the data and of each partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub n: usize,
    pub m: usize,
    pub n_default: usize,
    pub n_non_default: usize,
    pub default_rate: f64,
    /// Rows the classifiers are fitted on.
    pub n_fit: usize,
    /// Rows that select the calibration map.
    pub n_validation: usize,
    /// Rows that produce the mixing samples.
    pub n_test: usize,
    pub fit_default_rate: f64,
    pub validation_default_rate: f64,
    pub test_default_rate: f64,
}

/// The standardized partitions every stage works on.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub full: LabeledSample,
    pub fit: LabeledSample,
    pub validation: LabeledSample,
    pub test: LabeledSample,
    pub standardizer: Standardizer,
    pub summary: DatasetSummary,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<(LabeledSample, String)> {
    match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(path), _) => {
            let schema = cfg.schema.resolve()?;
            Ok((dataset::load_csv(path, &schema)?, path.display().to_string()))
        }
        (None, Some(s)) => Ok((
            dataset::synthetic::kaggle_like(s.rows, s.seed),
            format!("synthetic(rows={}, seed={})", s.rows, s.seed),
        )),
        (None, None) => Err(Error::Config("no data source configured".into())),
    }
}

/// Train/test split, then the training part is split again into the rows
/// the models are fitted on and the validation rows. The standardizer is
/// fitted on the fitting rows only.
pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let (full, source) = load_dataset(cfg)?;
    prepare_loaded(cfg, full, source)
}

pub fn prepare_loaded(cfg: &RunConfig, full: LabeledSample, source: String) -> Result<PreparedData> {
    let (train, test) = train_test_split(&full, &cfg.split)?;
    let (fit, validation) = calibration_split(&train, &cfg.split)?;
    let standardizer = fit_standardizer(&fit)?;
    let fit = apply_standardizer(&standardizer, &fit)?;
    let validation = apply_standardizer(&standardizer, &validation)?;
    let test = apply_standardizer(&standardizer, &test)?;
    let (n_non_default, n_default) = full.class_counts();
    let summary = DatasetSummary {
        source,
        n: full.n(),
        m: full.m(),
        n_default,
        n_non_default,
        default_rate: full.positive_rate(),
        n_fit: fit.n(),
        n_validation: validation.n(),
        n_test: test.n(),
        fit_default_rate: fit.positive_rate(),
        validation_default_rate: validation.positive_rate(),
        test_default_rate: test.positive_rate(),
    };
    Ok(PreparedData {
        full,
        fit,
        validation,
        test,
        standardizer,
        summary,
    })
}

/// Moments, correlation, beta fit and divergences of one mixing sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSummary {
    pub tag: ModelTag,
    pub n: usize,
    pub p: f64,
    pub pi2: f64,
    /// Absent when `p` is 0 or 1.
    pub rho: Option<f64>,
    /// Absent when the sample has no spread (`ρ = 0`).
    pub beta: Option<BetaParams>,
    pub kl: Vec<KlEntry>,
    pub ks: Option<KsResult>,
    /// Largest gap between the alternating moment sum and the direct
    /// mixture pmf, per portfolio size.
    pub moment_route: Vec<RouteCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEntry {
    pub d: usize,
    /// `D(non-parametric ‖ beta-binomial)`.
    #[serde(with = "crate::serde_float")]
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteCheck {
    pub d: usize,
    pub max_abs_diff: Option<f64>,
}

/// A mixture summary together with the count distributions it produced.
#[derive(Debug, Clone)]
pub struct MixtureAnalysis {
    pub summary: MixtureSummary,
    pub distributions: Vec<CountDistribution>,
}

/// Mixture stage for one sample: non-parametric pmfs for `d` up to
/// `nonparam_max_d`, beta-binomial pmfs for every `d`.
pub fn analyze_sample(sample: &MixingSample, sizes: &[usize], nonparam_max_d: usize) -> Result<MixtureAnalysis> {
    let moments = sample_moments(sample, 2)?;
    let (p, pi2) = (moments.p(), moments.get(2));
    let rho = default_correlation(p, pi2).ok();
    let beta = match beta_fit_moments(p, pi2) {
        Ok(b) => Some(b),
        Err(e) => {
            log::warn!("{}: no beta fit ({e})", sample.tag);
            None
        }
    };
    let ks = beta.as_ref().map(|b| ks_test(sample, b)).transpose()?;
    let mut distributions = Vec::new();
    let mut kl = Vec::new();
    let mut moment_route = Vec::new();
    for &d in sizes {
        let nonparam = if d <= nonparam_max_d {
            let np = empirical_count_pmf(sample, d)?;
            if d <= MAX_MOMENT_PMF_DIM {
                let diff = sample_moments(sample, d)
                    .and_then(|m| count_pmf_from_moments(&m, d))
                    .map(|alt| alt.pmf().iter().zip(np.pmf()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                if let Err(e) = &diff {
                    log::warn!("{}: moment route failed at d = {d}: {e}", sample.tag);
                }
                moment_route.push(RouteCheck {
                    d,
                    max_abs_diff: diff.ok(),
                });
            }
            Some(np)
        } else {
            None
        };
        let bb = beta.as_ref().map(|b| beta_binomial_pmf(b, d)).transpose()?;
        if let (Some(np), Some(bb)) = (&nonparam, &bb) {
            kl.push(KlEntry {
                d,
                value: kl_divergence(np, bb)?,
            });
        }
        distributions.extend(nonparam);
        distributions.extend(bb);
    }
    Ok(MixtureAnalysis {
        summary: MixtureSummary {
            tag: sample.tag,
            n: sample.len(),
            p,
            pi2,
            rho,
            beta,
            kl,
            ks,
            moment_route,
        },
        distributions,
    })
}

/// One cell of the VaR table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarEntry {
    pub model: ModelTag,
    pub source: DistributionSource,
    pub d: usize,
    pub alpha: f64,
    /// VaR of the number of defaults.
    pub count: usize,
    /// The same quantile as a fraction of the portfolio, `count / d`.
    pub loss_fraction: f64,
}

pub fn var_entries(model: ModelTag, dist: &CountDistribution, alphas: &[f64]) -> Result<Vec<VarEntry>> {
    alphas
        .iter()
        .map(|&alpha| {
            let count = var_alpha(dist, alpha)?;
            Ok(VarEntry {
                model,
                source: dist.source(),
                d: dist.d(),
                alpha,
                count,
                loss_fraction: count as f64 / dist.d() as f64,
            })
        })
        .collect()
}

pub fn write_var_csv(path: impl AsRef<Path>, entries: &[VarEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("model,source,d,alpha,var_count,var_loss_fraction\n");
    for e in entries {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.model.as_str(),
            e.source.as_str(),
            e.d,
            e.alpha,
            e.count,
            e.loss_fraction
        ));
    }
    write_text(path, &text)
}

/// A configured run bound to its output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub layout: RunLayout,
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let layout = RunLayout::new(config.output_dir.clone());
        Ok(Self { config, layout })
    }

    fn write_config(&self) -> Result<()> {
        write_text(&self.layout.config(), &self.config.to_toml_string()?)
    }

    /// Loads and splits the data and writes the dataset summary and the
    /// correlation matrix.
    pub fn ingest(&self) -> Result<PreparedData> {
        let data = prepare_data(&self.config)?;
        self.write_config()?;
        write_json(&self.layout.dataset(), &data.summary)?;
        write_correlation(&self.layout.correlation(), &data.full)?;
        Ok(data)
    }

    pub fn fit(&self, data: &PreparedData, tags: &[ModelTag]) -> Result<Vec<FittedModel>> {
        write_json(&self.layout.standardizer(), &data.standardizer)?;
        let mut out = Vec::with_capacity(tags.len());
        for &tag in tags {
            log::info!("fitting {tag} on {} rows", data.fit.n());
            let model = fit_model(tag, &data.fit, &self.config.models, self.config.model_seed)?;
            let path = self.layout.model(tag);
            ensure_parent(&path)?;
            save_model(&model, &path)?;
            out.push(model);
        }
        Ok(out)
    }

    fn load_fitted(&self, tag: ModelTag) -> Result<FittedModel> {
        let path = self.layout.model(tag);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        load_model(path)
    }

    /// Fits Platt and isotonic maps on held-out scores of the fitting rows
    /// and keeps the one with the smaller validation ECE. Logistic
    /// regression is left uncalibrated.
    pub fn calibrate(&self, data: &PreparedData, tags: &[ModelTag]) -> Result<Vec<(ModelTag, CalibrationChoice)>> {
        let mut out = Vec::new();
        for &tag in tags.iter().filter(|t| t.is_calibrated()) {
            let model = self.load_fitted(tag)?;
            let held_out = model.held_out_training_scores(&data.fit)?;
            let val = model.predict_rows(data.validation.features())?;
            let bins = self.config.calibration_bins;
            let choice = calibrate(&held_out, data.fit.labels(), &val, data.validation.labels(), bins)?;
            log::info!(
                "{tag}: platt ECE {:.4}, isotonic ECE {:.4} -> {}",
                choice.platt_ece,
                choice.isotonic_ece,
                choice.method
            );
            write_json(&self.layout.calibration(tag), &choice)?;
            let calibrated = choice.map.apply_all(&val);
            let rel = reliability_bins(&calibrated, data.validation.labels(), bins)?;
            let mut text = String::from("bin,lower,upper,count,mean_pred,pos_rate\n");
            for b in 0..rel.n_bins {
                text.push_str(&format!(
                    "{b},{},{},{},{},{}\n",
                    b as f64 / bins as f64,
                    (b + 1) as f64 / bins as f64,
                    rel.count[b],
                    rel.mean_pred[b],
                    rel.pos_rate[b]
                ));
            }
            write_text(&self.layout.reliability(tag), &text)?;
            out.push((tag, choice));
        }
        Ok(out)
    }

    fn calibration_map(&self, tag: ModelTag) -> Result<CalibrationMap> {
        if !tag.is_calibrated() {
            return Ok(CalibrationMap::Identity);
        }
        read_json::<CalibrationChoice>(&self.layout.calibration(tag)).map(|c| c.map)
    }

    /// Scores the test set with the calibrated models, writes the mixing
    /// samples, the classification metrics and the ROC points.
    pub fn evaluate(&self, data: &PreparedData, tags: &[ModelTag]) -> Result<Vec<(ModelTag, ClassificationReport)>> {
        let mut out = Vec::new();
        for &tag in tags {
            let model = self.load_fitted(tag)?;
            let map = self.calibration_map(tag)?;
            let q = map.apply_all(&model.predict_rows(data.test.features())?);
            let sample = MixingSample::new(q, tag)?;
            write_sample(self.layout.sample(tag), &sample)?;
            let labels = data.test.labels();
            let metrics = classification_report(&sample.q, labels, DEFAULT_THRESHOLD)?;
            write_json(&self.layout.metrics(tag), &metrics)?;
            let roc_path = self.layout.roc(tag);
            ensure_parent(&roc_path)?;
            roc_curve(&sample.q, labels)?.write_csv(&roc_path)?;
            out.push((tag, metrics));
        }
        Ok(out)
    }

    pub fn mixture(&self, tags: &[ModelTag]) -> Result<Vec<MixtureSummary>> {
        let mut out = Vec::new();
        for &tag in tags {
            let sample = read_sample(self.layout.sample(tag), tag)?;
            let analysis = analyze_sample(&sample, &self.config.portfolio_sizes, self.config.nonparametric_max_d)?;
            for dist in &analysis.distributions {
                export_pmf(dist, self.layout.pmf(tag, dist.source(), dist.d()))?;
            }
            write_json(&self.layout.mixture(tag), &analysis.summary)?;
            out.push(analysis.summary);
        }
        Ok(out)
    }

    /// A count distribution for one model: the persisted pmf if present,
    /// otherwise rebuilt from the mixing sample and the mixture summary.
    pub fn distribution(&self, tag: ModelTag, source: DistributionSource, d: usize) -> Result<CountDistribution> {
        let path = self.layout.pmf(tag, source, d);
        if path.exists() {
            return CountDistribution::read_csv(path, source);
        }
        match source {
            DistributionSource::Nonparametric => {
                empirical_count_pmf(&read_sample(self.layout.sample(tag), tag)?, d)
            }
            DistributionSource::BetaBinomial => {
                let summary: MixtureSummary = read_json(&self.layout.mixture(tag))?;
                let beta = summary
                    .beta
                    .ok_or_else(|| Error::InvalidArgument(format!("{tag} has no beta fit (zero correlation)")))?;
                beta_binomial_pmf(&beta, d)
            }
        }
    }

    /// VaR at the configured levels for every persisted pmf.
    pub fn var(&self, tags: &[ModelTag]) -> Result<Vec<VarEntry>> {
        let mut entries = Vec::new();
        for &tag in tags {
            for &d in &self.config.portfolio_sizes {
                for source in [DistributionSource::Nonparametric, DistributionSource::BetaBinomial] {
                    let path = self.layout.pmf(tag, source, d);
                    if !path.exists() {
                        continue;
                    }
                    let dist = CountDistribution::read_csv(path, source)?;
                    entries.extend(var_entries(tag, &dist, &self.config.alphas)?);
                }
            }
        }
        write_json(&self.layout.var_json(), &entries)?;
        write_var_csv(self.layout.var_csv(), &entries)?;
        Ok(entries)
    }

    /// Assembles the report from the persisted artifacts and writes it in
    /// both formats.
    pub fn report(&self) -> Result<RunReport> {
        let dataset: DatasetSummary = read_json(&self.layout.dataset())?;
        let mut models = Vec::new();
        for tag in ModelTag::ALL {
            let calibration = if tag.is_calibrated() {
                Some(read_json::<CalibrationChoice>(&self.layout.calibration(tag))?)
            } else {
                None
            };
            models.push(ModelReport {
                tag,
                metrics: read_json(&self.layout.metrics(tag))?,
                calibration: calibration.map(Into::into),
                mixture: read_json(&self.layout.mixture(tag))?,
            });
        }
        let report = RunReport {
            format_version: REPORT_FORMAT_VERSION,
            config: self.config.clone(),
            dataset,
            models,
            var: read_json(&self.layout.var_json())?,
        };
        write_text(&self.layout.report_text(), &report.to_key_value())?;
        write_text(&self.layout.report_tables(), &report.tables())?;
        write_json(&self.layout.report_json(), &report)?;
        Ok(report)
    }

    /// Every stage in order, each error tagged with its stage name.
    pub fn run_all(&self) -> Result<RunReport> {
        let tags = ModelTag::ALL;
        let data = self.ingest().map_err(Error::at_stage("ingest"))?;
        self.fit(&data, &tags).map_err(Error::at_stage("fit"))?;
        self.calibrate(&data, &tags).map_err(Error::at_stage("calibrate"))?;
        self.evaluate(&data, &tags).map_err(Error::at_stage("evaluate"))?;
        self.mixture(&tags).map_err(Error::at_stage("mixture"))?;
        self.var(&tags).map_err(Error::at_stage("var"))?;
        self.report().map_err(Error::at_stage("report"))
    }
}

/// Runs the whole pipeline into `cfg.output_dir`.
pub fn run_pipeline(cfg: RunConfig) -> Result<RunReport> {
    Run::new(cfg).map_err(Error::at_stage("config"))?.run_all()
}

fn write_correlation(path: &Path, data: &LabeledSample) -> Result<()> {
    let mut names: Vec<String> = data.feature_names().to_vec();
    names.push("default".into());
    let corr = correlation_matrix(data);
    let mut text = format!("variable,{}\n", names.join(","));
    for (name, row) in names.iter().zip(&corr) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    write_text(path, &text)
}
