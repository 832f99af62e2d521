use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogisticModel, ModelError, RandomForestModel, ScoreModel};
use crate::data::{DataFormat, FeatureVector, TfIdfEncoder, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Forest(RandomForestModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Logistic(_) => ModelKind::Logistic,
            TrainedModel::Forest(_) => ModelKind::Forest,
        }
    }
}

impl ScoreModel for TrainedModel {
    fn dim(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.dim(),
            TrainedModel::Forest(m) => m.dim(),
        }
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        match self {
            TrainedModel::Logistic(m) => m.score(x),
            TrainedModel::Forest(m) => m.score(x),
        }
    }
}

/// A model that consumes raw feature counts, applying a tf-idf encoder (when
/// present) before scoring. Adding or removing a raw feature therefore
/// renormalizes the whole encoded vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedModel<M> {
    pub encoder: Option<TfIdfEncoder>,
    pub inner: M,
}

impl<M: ScoreModel> ScoreModel for EncodedModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        match &self.encoder {
            Some(enc) => self.inner.score(&enc.encode(x)?),
            None => self.inner.score(x),
        }
    }

    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        match &self.encoder {
            Some(enc) => {
                let encoded = xs
                    .iter()
                    .map(|x| {
                        self.check_dim(x)?;
                        Ok(enc.encode(x)?)
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?;
                self.inner.batch_score(&encoded)
            }
            None => self.inner.batch_score(xs),
        }
    }
}

/// How the training run split its data, so later commands can recover the
/// same held-out samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Everything needed to score raw samples: vocabulary, optional encoder and
/// the trained classifier. Persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub vocabulary: Vocabulary,
    pub data_format: DataFormat,
    pub split: Option<SplitSpec>,
    pub model: EncodedModel<TrainedModel>,
}

impl ModelBundle {
    pub fn kind(&self) -> ModelKind {
        self.model.inner.kind()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string(self).map_err(|e| ModelError::Persist(e.to_string()))?;
        fs::write(path, text).map_err(|e| ModelError::Persist(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ModelError::Persist(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let bundle: Self =
            serde_json::from_str(text).map_err(|e| ModelError::Persist(e.to_string()))?;
        if bundle.vocabulary.len() != bundle.model.dim() {
            return Err(ModelError::Persist(format!(
                "vocabulary has {} names but model expects {} features",
                bundle.vocabulary.len(),
                bundle.model.dim()
            )));
        }
        Ok(bundle)
    }
}

impl ScoreModel for ModelBundle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.model.score(x)
    }

    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        self.model.batch_score(xs)
    }
}
