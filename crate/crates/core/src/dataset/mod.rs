//! Obligor covariate tables: CSV ingestion, seeded partitions and z-score
//! standardization.
//!
//! Rows are obligors, columns are covariates, and every row carries a binary
//! default label. Categorical codes (`SEX`, `EDUCATION`, `MARRIAGE`, `PAY_*`)
//! are kept as numeric ordinals, so every model sees the same feature set.

pub mod synthetic;

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariate columns of the credit-card default table, `ID` and target excluded.
pub const KAGGLE_COVARIATES: [&str; 23] = [
    "LIMIT_BAL",
    "SEX",
    "EDUCATION",
    "MARRIAGE",
    "AGE",
    "PAY_0",
    "PAY_2",
    "PAY_3",
    "PAY_4",
    "PAY_5",
    "PAY_6",
    "BILL_AMT1",
    "BILL_AMT2",
    "BILL_AMT3",
    "BILL_AMT4",
    "BILL_AMT5",
    "BILL_AMT6",
    "PAY_AMT1",
    "PAY_AMT2",
    "PAY_AMT3",
    "PAY_AMT4",
    "PAY_AMT5",
    "PAY_AMT6",
];
pub const KAGGLE_TARGET: &str = "default.payment.next.month";
pub const KAGGLE_ID: &str = "ID";

/// Names the covariate columns, the binary target and an optional row key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema {
    columns: Vec<String>,
    target: String,
    id: Option<String>,
}

impl CovariateSchema {
    pub fn new(columns: Vec<String>, target: String, id: Option<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("schema has no covariate columns".into()));
        }
        let mut seen = HashSet::new();
        for name in columns.iter().chain(std::iter::once(&target)).chain(id.iter()) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{name}`")));
            }
        }
        Ok(Self {
            columns,
            target,
            id,
        })
    }

    /// The 23-covariate credit-card default layout with `ID` as row key.
    pub fn kaggle() -> Self {
        Self {
            columns: KAGGLE_COVARIATES.iter().map(|s| s.to_string()).collect(),
            target: KAGGLE_TARGET.to_string(),
            id: Some(KAGGLE_ID.to_string()),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }
}

/// Row-major covariate matrix with one binary label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    features: Vec<f64>,
    labels: Vec<u8>,
    n_features: usize,
    feature_names: Vec<String>,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, n_features: usize) -> Result<Self> {
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::with_names(features, labels, names)
    }

    pub fn with_names(features: Vec<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let m = feature_names.len();
        if m == 0 {
            return Err(Error::Schema("at least one covariate is required".into()));
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() * m {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * m,
                got: features.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::BadCell {
                row: i,
                column: "label".into(),
                reason: format!("label {} outside {{0,1}}", labels[i]),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadCell {
                row: i / m,
                column: feature_names[i % m].clone(),
                reason: "non-finite value".into(),
            });
        }
        Ok(Self {
            features,
            labels,
            n_features: m,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    /// The whole covariate matrix, row-major.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Number of (non-default, default) rows.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.n() - pos, pos)
    }

    pub fn positive_rate(&self) -> f64 {
        self.class_counts().1 as f64 / self.n() as f64
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::with_names(features, labels, self.feature_names.clone())
    }
}

/// Fractions and seed for the train/test and calibration/validation partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub calibration_fraction: f64,
    pub seed: u64,
    /// Shuffle each label class separately. Off by default.
    pub stratify: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            calibration_fraction: 0.75,
            seed: 20_230_601,
            stratify: false,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("calibration_fraction", self.calibration_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie strictly inside (0,1), got {f}")));
            }
        }
        Ok(())
    }
}

/// Size of the first part: `⌊n·f⌋`, guarded against `n·f` landing a ulp
/// below an integer.
pub fn first_part_size(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction + 1e-9).floor() as usize
}

/// Seeded partition of `0..labels.len()` into two disjoint index lists.
///
/// `stream` separates the random streams of independent splits that share a
/// seed.
pub fn partition_indices(
    labels: &[u8],
    fraction: f64,
    seed: u64,
    stream: u64,
    stratify: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} outside (0,1)")));
    }
    let k = first_part_size(n, fraction);
    if k == 0 || k == n {
        return Err(Error::TooSmall(format!(
            "{n} rows with fraction {fraction} leave an empty part"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    if !stratify {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let second = idx.split_off(k);
        return Ok((idx, second));
    }
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);
    let k_pos = ((pos.len() as f64 * k as f64 / n as f64).round() as usize).min(pos.len()).min(k);
    let k_neg = (k - k_pos).min(neg.len());
    let k_pos = k - k_neg;
    let mut first: Vec<usize> = pos[..k_pos].to_vec();
    first.extend_from_slice(&neg[..k_neg]);
    let mut second: Vec<usize> = pos[k_pos..].to_vec();
    second.extend_from_slice(&neg[k_neg..]);
    first.shuffle(&mut rng);
    second.shuffle(&mut rng);
    Ok((first, second))
}

fn split_with(data: &LabeledSample, fraction: f64, cfg: &SplitConfig, stream: u64) -> Result<(LabeledSample, LabeledSample)> {
    if data.n() < 2 {
        return Err(Error::TooSmall(format!("{} rows cannot be split", data.n())));
    }
    let (a, b) = partition_indices(data.labels(), fraction, cfg.seed, stream, cfg.stratify)?;
    Ok((data.subset(&a)?, data.subset(&b)?))
}

/// Seeded shuffle, then the first `⌊n·train_fraction⌋` rows train.
pub fn train_test_split(data: &LabeledSample, cfg: &SplitConfig) -> Result<(LabeledSample, LabeledSample)> {
    split_with(data, cfg.train_fraction, cfg, 0)
}

/// Splits a training sample into a calibration part and a validation part.
pub fn calibration_split(train: &LabeledSample, cfg: &SplitConfig) -> Result<(LabeledSample, LabeledSample)> {
    split_with(train, cfg.calibration_fraction, cfg, 1)
}

/// Per-column z-score transform. Standard deviations use the population
/// (divide-by-n) convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with zero spread on the fitting rows; they map to 0.
    pub constant_columns: Vec<usize>,
}

pub fn fit_standardizer(train: &LabeledSample) -> Result<Standardizer> {
    let n = train.n();
    if n < 2 {
        return Err(Error::TooSmall("standardizer needs at least 2 rows".into()));
    }
    let m = train.m();
    let mut means = vec![0.0; m];
    for row in train.rows() {
        for (mu, v) in means.iter_mut().zip(row) {
            *mu += v;
        }
    }
    means.iter_mut().for_each(|mu| *mu /= n as f64);
    let mut vars = vec![0.0; m];
    for row in train.rows() {
        for j in 0..m {
            let d = row[j] - means[j];
            vars[j] += d * d;
        }
    }
    let stds: Vec<f64> = vars.iter().map(|v| (v / n as f64).sqrt()).collect();
    let mut constant_columns = Vec::new();
    for (j, &s) in stds.iter().enumerate() {
        if s <= 1e-12 * means[j].abs().max(1.0) {
            log::warn!("column `{}` is constant on the fitting rows; standardizing it to 0", train.feature_names()[j]);
            constant_columns.push(j);
        }
    }
    Ok(Standardizer {
        means,
        stds,
        constant_columns,
    })
}

impl Standardizer {
    fn is_constant(&self, j: usize) -> bool {
        self.constant_columns.binary_search(&j).is_ok()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.is_constant(j) {
                0.0
            } else {
                (row[j] - self.means[j]) / self.stds[j]
            };
        }
    }

    /// Undoes the transform; constant columns come back as their mean.
    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &z)| {
                if self.is_constant(j) {
                    self.means[j]
                } else {
                    z * self.stds[j] + self.means[j]
                }
            })
            .collect()
    }
}

pub fn apply_standardizer(s: &Standardizer, data: &LabeledSample) -> Result<LabeledSample> {
    if s.means.len() != data.m() {
        return Err(Error::DimensionMismatch {
            expected: s.means.len(),
            got: data.m(),
        });
    }
    let mut features = vec![0.0; data.n() * data.m()];
    for (row, out) in data.rows().zip(features.chunks_exact_mut(data.m())) {
        s.transform_row(row, out);
    }
    LabeledSample::with_names(features, data.labels().to_vec(), data.feature_names().to_vec())
}

/// Reads a comma-separated table with one header row.
///
/// Header names must be exactly the schema's covariates, target and optional
/// id column, in any order. Features come back in schema order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CovariateSchema) -> Result<LabeledSample> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let position = |name: &str| -> Result<usize> {
        let hits: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| *h == name).map(|(i, _)| i).collect();
        match hits.len() {
            1 => Ok(hits[0]),
            0 => Err(Error::Schema(format!("missing column `{name}`"))),
            _ => Err(Error::Schema(format!("column `{name}` appears more than once"))),
        }
    };
    let feature_pos: Vec<usize> = schema.columns().iter().map(|c| position(c)).collect::<Result<_>>()?;
    let target_pos = position(schema.target())?;
    let id_pos = schema.id().map(position).transpose()?;
    let known = feature_pos.len() + 1 + usize::from(id_pos.is_some());
    if headers.len() != known {
        let expected: HashSet<&str> = schema
            .columns()
            .iter()
            .map(String::as_str)
            .chain([schema.target()])
            .chain(schema.id())
            .collect();
        let extra = headers.iter().find(|h| !expected.contains(h.as_str())).cloned().unwrap_or_default();
        return Err(Error::Schema(format!("unexpected column `{extra}`")));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (&p, name) in feature_pos.iter().zip(schema.columns()) {
            let cell = record.get(p).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                row,
                column: name.clone(),
                reason: format!("non-numeric value `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row,
                    column: name.clone(),
                    reason: format!("non-finite value `{cell}`"),
                });
            }
            features.push(v);
        }
        let cell = record.get(target_pos).unwrap_or("");
        let label = match cell.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::BadCell {
                    row,
                    column: schema.target().to_string(),
                    reason: format!("label `{cell}` outside {{0,1}}"),
                })
            }
        };
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledSample::with_names(features, labels, schema.columns().to_vec())
}

/// Writes `data` in the layout `load_csv` reads, numbering rows from 1 when
/// the schema has an id column.
pub fn write_csv(path: impl AsRef<Path>, data: &LabeledSample, schema: &CovariateSchema) -> Result<()> {
    let path = path.as_ref();
    if schema.columns().len() != data.m() {
        return Err(Error::DimensionMismatch {
            expected: schema.columns().len(),
            got: data.m(),
        });
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header: Vec<&str> = Vec::new();
    header.extend(schema.id());
    header.extend(schema.columns().iter().map(String::as_str));
    header.push(schema.target());
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, row) in data.rows().enumerate() {
        let mut line = String::new();
        if schema.id().is_some() {
            line.push_str(&(i + 1).to_string());
            line.push(',');
        }
        for v in row {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&data.labels()[i].to_string());
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Pearson correlations between every pair of covariates, with the label
/// appended as the last variable. Zero-variance variables get 0 off-diagonal.
pub fn correlation_matrix(data: &LabeledSample) -> Vec<Vec<f64>> {
    let n = data.n() as f64;
    let m = data.m();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| data.column(j)).collect();
    cols.push(data.labels().iter().map(|&y| f64::from(y)).collect());
    let stats: Vec<(f64, f64)> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, sd)
        })
        .collect();
    let k = cols.len();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        out[a][a] = 1.0;
        for b in (a + 1)..k {
            let (ma, sa) = stats[a];
            let (mb, sb) = stats[b];
            let r = if sa > 0.0 && sb > 0.0 {
                cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n * sa * sb)
            } else {
                0.0
            };
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    out
}
