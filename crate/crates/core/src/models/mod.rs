//! Black-box scoring interface and the built-in classifiers.
//!
//! Every model maps a [`FeatureVector`] to the probability of the positive
//! (malicious) class. The explainer, attack and evaluation code only ever
//! query models through [`ScoreModel`].

mod bundle;
mod external;
mod forest;
mod logistic;

use thiserror::Error;

use crate::data::{DataError, Dataset, FeatureVector};

pub use bundle::{EncodedModel, ModelBundle, ModelKind, SplitSpec, TrainedModel};
pub use external::{ExternalModel, ProtocolError};
pub use forest::{DecisionTree, FeaturesPerSplit, ForestParams, RandomForestModel, TreeNode};
pub use logistic::{LogisticModel, LogisticParams, TrainingTrace};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: model expects {expected} features, sample has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scoring protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model file: {0}")]
    Persist(String),
}

/// Query-only access to a binary classifier.
///
/// Implementations must be deterministic for a fixed model state and return
/// scores in `[0, 1]`.
pub trait ScoreModel: Send + Sync {
    /// Dimension of the feature space the model was built for.
    fn dim(&self) -> usize;

    /// Probability of the positive class.
    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError>;

    /// Scores many vectors; must agree element-wise with [`ScoreModel::score`].
    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        xs.iter().map(|x| self.score(x)).collect()
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if x.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }
}

impl<M: ScoreModel + ?Sized> ScoreModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        (**self).score(x)
    }
    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        (**self).batch_score(xs)
    }
}

impl<M: ScoreModel + ?Sized> ScoreModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        (**self).score(x)
    }
    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        (**self).batch_score(xs)
    }
}

/// A model that returns the same score everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel {
    pub dim: usize,
    pub value: f64,
}

impl ScoreModel for ConstantModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        Ok(self.value.clamp(0.0, 1.0))
    }
}

/// Confusion-derived metrics at the 0.5 decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassificationMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub fn evaluate_classifier<M: ScoreModel + ?Sized>(
    model: &M,
    data: &Dataset,
) -> Result<ClassificationMetrics, ModelError> {
    let xs: Vec<FeatureVector> = data.samples.iter().map(|s| s.features.clone()).collect();
    let scores = model.batch_score(&xs)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (s, &p) in data.samples.iter().zip(&scores) {
        match (s.label == 1, p > 0.5) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    Ok(ClassificationMetrics {
        tpr: ratio(tp, fn_),
        fpr: ratio(fp, tn),
        accuracy: ratio(tp + tn, fp + fn_),
        positives: tp + fn_,
        negatives: fp + tn,
    })
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
