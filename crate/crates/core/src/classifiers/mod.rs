//! Conditional default-probability models `h ∈ {LR, KNN, RF, AB}` and the
//! mixing sample `q_i = h(x_i)` they produce.

pub mod adaboost;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adaboost::{adaboost_fit, adaboost_predict_proba, AdaBoostConfig, AdaBoostModel};
pub use forest::{rf_fit, rf_predict_proba, ForestConfig, ForestModel};
pub use knn::{knn_fit, knn_predict_proba, KnnConfig, KnnModel};
pub use logistic::{logistic_fit, logistic_predict, LogisticConfig, LogisticModel};
pub use tree::{tree_fit, DecisionTree};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Lr,
    Rf,
    Ab,
    Knn,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Lr, ModelTag::Rf, ModelTag::Ab, ModelTag::Knn];
    pub const MACHINE_LEARNING: [ModelTag; 3] = [ModelTag::Rf, ModelTag::Ab, ModelTag::Knn];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Lr => "lr",
            ModelTag::Rf => "rf",
            ModelTag::Ab => "ab",
            ModelTag::Knn => "knn",
        }
    }

    /// Only the machine-learning models are recalibrated.
    pub fn is_calibrated(&self) -> bool {
        !matches!(self, ModelTag::Lr)
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.as_str().to_uppercase())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(ModelTag::Lr),
            "rf" => Ok(ModelTag::Rf),
            "ab" => Ok(ModelTag::Ab),
            "knn" => Ok(ModelTag::Knn),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}` (expected lr|rf|ab|knn)"))),
        }
    }
}

/// Hyperparameters for all four models.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub lr: LogisticConfig,
    pub knn: KnnConfig,
    pub rf: ForestConfig,
    pub ab: AdaBoostConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Logistic(LogisticModel),
    Knn(KnnModel),
    Forest(ForestModel),
    AdaBoost(AdaBoostModel),
}

pub fn fit_model(tag: ModelTag, train: &LabeledSample, cfg: &ClassifierConfig, seed: u64) -> Result<FittedModel> {
    Ok(match tag {
        ModelTag::Lr => FittedModel::Logistic(logistic_fit(train, cfg.lr.ridge_lambda, cfg.lr.tol, cfg.lr.max_iter)?),
        ModelTag::Knn => FittedModel::Knn(knn_fit(train, cfg.knn.k)?),
        ModelTag::Rf => FittedModel::Forest(rf_fit(train, &cfg.rf, seed)?),
        ModelTag::Ab => FittedModel::AdaBoost(adaboost_fit(train, cfg.ab.n_rounds, seed)?),
    })
}

impl FittedModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            FittedModel::Logistic(_) => ModelTag::Lr,
            FittedModel::Knn(_) => ModelTag::Knn,
            FittedModel::Forest(_) => ModelTag::Rf,
            FittedModel::AdaBoost(_) => ModelTag::Ab,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Logistic(m) => m.n_features(),
            FittedModel::Knn(m) => m.n_features(),
            FittedModel::Forest(m) => m.n_features(),
            FittedModel::AdaBoost(m) => m.n_features(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Logistic(m) => logistic_predict(m, x),
            FittedModel::Knn(m) => knn_predict_proba(m, x),
            FittedModel::Forest(m) => rf_predict_proba(m, x),
            FittedModel::AdaBoost(m) => adaboost_predict_proba(m, x),
        }
    }

    /// Probabilities for a flat row-major block of feature rows.
    pub fn predict_rows(&self, features: &[f64]) -> Result<Vec<f64>> {
        let m = self.n_features();
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !features.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: features.len() % m,
            });
        }
        features.par_chunks_exact(m).map(|x| self.predict_proba(x)).collect()
    }

    /// Scores on the model's own training rows that were not fitted on those
    /// rows: out-of-bag for forests, leave-one-out for KNN. Logistic and
    /// boosted models return plain in-sample predictions.
    pub fn held_out_training_scores(&self, train: &LabeledSample) -> Result<Vec<f64>> {
        match self {
            FittedModel::Forest(f) => f.oob_predict(train),
            FittedModel::Knn(k) => {
                if k.n_train() != train.n() {
                    return Err(Error::DimensionMismatch {
                        expected: k.n_train(),
                        got: train.n(),
                    });
                }
                (0..train.n()).into_par_iter().map(|i| k.predict_proba_excluding(i)).collect()
            }
            _ => predict_mixing_sample(self, train).map(|s| s.q),
        }
    }
}

/// Predicted per-obligor default probabilities, the realizations of the
/// mixing variable for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSample {
    pub q: Vec<f64>,
    pub tag: ModelTag,
}

impl MixingSample {
    pub fn new(q: Vec<f64>, tag: ModelTag) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(bad) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("mixing value {bad} outside [0,1]")));
        }
        Ok(Self { q, tag })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.q.iter().sum::<f64>() / self.q.len() as f64
    }
}

pub fn predict_mixing_sample(model: &FittedModel, data: &LabeledSample) -> Result<MixingSample> {
    if data.m() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: data.m(),
        });
    }
    let flat: Vec<f64> = data.rows().flatten().copied().collect();
    MixingSample::new(model.predict_rows(&flat)?, model.tag())
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model file: JSON object with `format_version`, `tag` and `model`
/// (a `kind`-tagged parameter record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub tag: ModelTag,
    pub model: FittedModel,
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let artifact = ModelArtifact {
        format_version: MODEL_FORMAT_VERSION,
        tag: model.tag(),
        model: model.clone(),
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &artifact)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let artifact: ModelArtifact = serde_json::from_reader(std::io::BufReader::new(file))?;
    if artifact.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model file version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            artifact.format_version
        )));
    }
    if artifact.tag != artifact.model.tag() {
        return Err(Error::Config("model tag does not match its parameters".into()));
    }
    Ok(artifact.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip_through_strings() {
        for tag in ModelTag::ALL {
            assert_eq!(tag.as_str().parse::<ModelTag>().unwrap(), tag);
        }
        assert!("svm".parse::<ModelTag>().is_err());
        assert_eq!(ModelTag::Knn.to_string(), "KNN");
    }

    #[test]
    fn constant_model_gives_constant_sample() {
        let model = FittedModel::Logistic(LogisticModel {
            beta: vec![0.3, 0.0],
            ridge_lambda: 0.0,
            converged: true,
            iterations: 0,
        });
        let data = LabeledSample::new(vec![1.0, 2.0, 3.0], vec![0, 1, 0], 1).unwrap();
        let s = predict_mixing_sample(&model, &data).unwrap();
        assert!(s.q.iter().all(|&v| v == s.q[0]));
        assert!(matches!(model.predict_rows(&[]), Err(Error::EmptyDataset)));
        assert!(MixingSample::new(vec![], ModelTag::Lr).is_err());
        assert!(MixingSample::new(vec![1.5], ModelTag::Lr).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = FittedModel::Logistic(LogisticModel {
            beta: vec![0.0, 0.0, 0.0],
            ridge_lambda: 0.0,
            converged: true,
            iterations: 0,
        });
        let data = LabeledSample::new(vec![1.0, 2.0], vec![0, 1], 1).unwrap();
        assert!(matches!(predict_mixing_sample(&model, &data), Err(Error::DimensionMismatch { .. })));
    }
}
