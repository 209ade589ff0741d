use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::DEFAULT_BINS;
use crate::classifiers::ClassifierConfig;
use crate::dataset::{CovariateSchema, SplitConfig, KAGGLE_ID};
use crate::error::{Error, Result};
use crate::mixture::MAX_MOMENT_PMF_DIM;

/// Where the obligor table comes from. Exactly one of the two must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file in the configured schema.
    pub path: Option<PathBuf>,
    /// Generate a Kaggle-schema table instead of reading one.
    pub synthetic: Option<SyntheticData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub rows: usize,
    pub seed: u64,
}

/// Overrides of the Kaggle column layout; unset fields keep the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub columns: Option<Vec<String>>,
    pub target: Option<String>,
    /// Identifier column to ignore; an empty string means there is none.
    pub id: String,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            columns: None,
            target: None,
            id: KAGGLE_ID.to_string(),
        }
    }
}

impl SchemaConfig {
    pub fn resolve(&self) -> Result<CovariateSchema> {
        let base = CovariateSchema::kaggle();
        let columns = self.columns.clone().unwrap_or_else(|| base.columns().to_vec());
        let target = self.target.clone().unwrap_or_else(|| base.target().to_string());
        let id = (!self.id.is_empty()).then(|| self.id.clone());
        CovariateSchema::new(columns, target, id)
    }
}

/// Everything a pipeline run depends on. Loaded from TOML; every field has
/// a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub schema: SchemaConfig,
    pub split: SplitConfig,
    /// Seed handed to the randomized classifiers.
    pub model_seed: u64,
    pub models: ClassifierConfig,
    pub calibration_bins: usize,
    pub portfolio_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Non-parametric pmfs (and their divergence from the beta fit) are
    /// produced for portfolio sizes up to this value.
    pub nonparametric_max_d: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            schema: SchemaConfig::default(),
            split: SplitConfig::default(),
            model_seed: 7,
            models: ClassifierConfig::default(),
            calibration_bins: DEFAULT_BINS,
            portfolio_sizes: vec![25, 6000],
            alphas: vec![0.90, 0.95, 0.99],
            nonparametric_max_d: MAX_MOMENT_PMF_DIM,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides both the split seed and the model seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.model_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("set either data.path or data.synthetic, not both".into())),
            (None, None) => return Err(Error::Config("no data source: set data.path or data.synthetic".into())),
            (None, Some(s)) if s.rows < 10 => {
                return Err(Error::Config(format!("data.synthetic.rows = {} is too small", s.rows)))
            }
            _ => {}
        }
        self.split.validate()?;
        self.schema.resolve()?;
        if self.calibration_bins == 0 {
            return Err(Error::Config("calibration_bins must be at least 1".into()));
        }
        if self.portfolio_sizes.is_empty() || self.portfolio_sizes.contains(&0) {
            return Err(Error::Config("portfolio_sizes must be a non-empty list of sizes >= 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("alphas must not be empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("alpha {a} must lie strictly inside (0,1)")));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("alphas must be strictly increasing".into()));
        }
        Ok(())
    }
}
