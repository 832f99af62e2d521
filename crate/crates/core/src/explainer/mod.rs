//! Per-sample feature attribution for binary classifiers.
//!
//! [`explain`] runs four stages against a black-box [`ScoreModel`]:
//!
//! 1. [`select_core_features`]: greedy search for the features that push the
//!    model closest to its 0.5 decision border;
//! 2. [`select_positive_contributors`]: the remaining features whose single
//!    addition to that core moves the score toward the full-sample score;
//! 3. [`build_surrogate_set`]: binary masks over the selected features, each
//!    scored by the model;
//! 4. a ridge fit of mask → score, whose coefficients are the attributions.
//!
//! Attributions are oriented toward the predicted class: for samples scored
//! above 0.5 they are the ridge coefficients on the positive-class score, for
//! the others they are negated (the coefficients on `1 − f`). Features outside
//! the selection have attribution 0.

mod selection;
mod surrogate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureVector, Vocabulary};
use crate::models::{ModelError, ScoreModel};
use crate::ridge::{ridge_fit, RidgeError};

pub use selection::{
    select_core_features, select_positive_contributors, CoreSelection, CoreStep,
    PositiveSelection, PositiveStep,
};
pub use surrogate::{build_surrogate_set, SurrogateTrainingSet};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("nothing to attribute")]
    NothingToAttribute,
    #[error("invalid explainer config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("ridge fit: {0}")]
    Ridge(#[from] RidgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub max_core_features: usize,
    /// Ridge penalty.
    pub alpha: f64,
    /// Surrogate rows; `None` means `max(1000, 10·|selected|)`.
    pub mask_samples: Option<usize>,
    /// Minimum score movement for a feature to count as a positive contributor.
    pub contribution_epsilon: f64,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            max_core_features: 10,
            alpha: 1.0,
            mask_samples: None,
            contribution_epsilon: 1e-6,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.max_core_features == 0 {
            return Err(ExplainError::InvalidConfig("max_core_features must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ExplainError::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.contribution_epsilon.is_finite() && self.contribution_epsilon >= 0.0) {
            return Err(ExplainError::InvalidConfig(format!(
                "contribution_epsilon must be >= 0, got {}",
                self.contribution_epsilon
            )));
        }
        if let Some(k) = self.mask_samples {
            if k < 2 {
                return Err(ExplainError::InvalidConfig(format!("mask_samples must be >= 2, got {k}")));
            }
        }
        Ok(())
    }

    /// Surrogate row count for `selected` features, never below `selected + 2`.
    pub fn surrogate_rows(&self, selected: usize) -> usize {
        let k = self.mask_samples.unwrap_or_else(|| (10 * selected).max(1000));
        k.max(selected + 2)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub core: CoreSelection,
    pub positive: PositiveSelection,
}

/// Fit-quality figures for the surrogate; informational only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDiagnostics {
    pub rows: usize,
    /// Root-mean-square training residual of the ridge fit.
    pub training_rmse: f64,
    /// Surrogate prediction on the all-ones mask, in positive-class units.
    pub full_mask_prediction: f64,
    /// Model score on the all-ones mask.
    pub full_mask_score: f64,
    pub system_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_id: usize,
    pub name: Option<String>,
    pub attribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub sample_id: Option<usize>,
    pub original_score: f64,
    pub selected: Vec<Attribution>,
    pub intercept: f64,
    pub core: Vec<usize>,
    pub positive: Vec<usize>,
    #[serde(skip)]
    pub trace: SelectionTrace,
    #[serde(skip)]
    pub diagnostics: SurrogateDiagnostics,
}

impl AttributionReport {
    pub fn predicted_positive(&self) -> bool {
        self.original_score > 0.5
    }

    /// Attribution of `feature` (0 when it was not selected).
    pub fn attribution(&self, feature: usize) -> f64 {
        self.selected
            .iter()
            .find(|a| a.feature_id == feature)
            .map_or(0.0, |a| a.attribution)
    }

    pub fn selected_ids(&self) -> Vec<usize> {
        self.selected.iter().map(|a| a.feature_id).collect()
    }

    /// Selected features by descending attribution, ties by ascending id.
    pub fn ranked(&self) -> Vec<usize> {
        let mut v: Vec<&Attribution> = self.selected.iter().collect();
        v.sort_by(|a, b| {
            b.attribution
                .total_cmp(&a.attribution)
                .then(a.feature_id.cmp(&b.feature_id))
        });
        v.into_iter().map(|a| a.feature_id).collect()
    }

    pub fn with_sample_id(mut self, id: usize) -> Self {
        self.sample_id = Some(id);
        self
    }

    pub fn with_names(mut self, vocabulary: &Vocabulary) -> Self {
        for a in &mut self.selected {
            a.name = vocabulary.name(a.feature_id).map(str::to_owned);
        }
        self
    }

    /// Single-line JSON with fixed key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Explains `f`'s prediction on `x`. Deterministic for fixed
/// `(model state, x, cfg)`.
pub fn explain<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    cfg: &ExplainerConfig,
) -> Result<AttributionReport, ExplainError> {
    cfg.validate()?;
    f.check_dim(x)?;
    let original_score = f.score(x)?;
    let orient = if original_score > 0.5 { 1.0 } else { -1.0 };

    let core = select_core_features(f, x, cfg)?;
    assert!(
        core.steps.iter().fold((core.initial_gap, true), |(prev, ok), s| (s.gap, ok && s.gap < prev)).1,
        "core gap sequence must be strictly decreasing"
    );
    let core_ids = core.features();
    let positive = select_positive_contributors(f, x, &core_ids, cfg)?;
    let positive_ids = positive.features();
    debug_assert!(positive_ids.iter().all(|i| !core_ids.contains(i)));

    let selected_ids: Vec<usize> = core_ids.iter().chain(&positive_ids).copied().collect();
    let trace = SelectionTrace { core, positive };

    if selected_ids.is_empty() {
        let base = f.score(&FeatureVector::zeros(x.dim()))?;
        return Ok(AttributionReport {
            sample_id: None,
            original_score,
            selected: Vec::new(),
            intercept: if orient > 0.0 { base } else { 1.0 - base },
            core: core_ids,
            positive: positive_ids,
            trace,
            diagnostics: SurrogateDiagnostics::default(),
        });
    }

    let rows = cfg.surrogate_rows(selected_ids.len());
    let ts = build_surrogate_set(f, x, &selected_ids, rows, cfg.seed)?;
    let fit = ridge_fit(&ts.masks, ts.rows(), ts.cols(), &ts.scores, cfg.alpha)?;

    let sse: f64 = (0..ts.rows())
        .map(|r| (fit.predict(ts.row(r)) - ts.scores[r]).powi(2))
        .sum();
    let diagnostics = SurrogateDiagnostics {
        rows: ts.rows(),
        training_rmse: (sse / ts.rows() as f64).sqrt(),
        full_mask_prediction: fit.predict(ts.row(0)),
        full_mask_score: ts.scores[0],
        system_residual: fit.system_residual,
    };

    let selected = selected_ids
        .iter()
        .zip(&fit.weights)
        .map(|(&feature_id, &w)| Attribution {
            feature_id,
            name: None,
            attribution: orient * w,
        })
        .collect();
    Ok(AttributionReport {
        sample_id: None,
        original_score,
        selected,
        intercept: if orient > 0.0 {
            fit.intercept
        } else {
            1.0 - fit.intercept
        },
        core: core_ids,
        positive: positive_ids,
        trace,
        diagnostics,
    })
}
