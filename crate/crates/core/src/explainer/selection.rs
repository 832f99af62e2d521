//! Feature selection stages: borderline core features, then features whose
//! individual addition moves the score toward the full-sample prediction.

use serde::{Deserialize, Serialize};

use super::{ExplainError, ExplainerConfig};
use crate::data::FeatureVector;
use crate::models::ScoreModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreStep {
    pub feature: usize,
    /// `|f(x_c) − 0.5|` right after this feature joined the core.
    pub gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoreSelection {
    /// Gap of the empty vector, before any feature is adopted.
    pub initial_gap: f64,
    pub steps: Vec<CoreStep>,
}

impl CoreSelection {
    pub fn features(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }

    pub fn final_gap(&self) -> f64 {
        self.steps.last().map_or(self.initial_gap, |s| s.gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveStep {
    pub feature: usize,
    /// `f(x_c + x_i) − f(x_c)`.
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PositiveSelection {
    pub core_score: f64,
    pub full_score: f64,
    /// +1 toward the positive class, −1 toward the negative, 0 undecided.
    pub direction: f64,
    pub steps: Vec<PositiveStep>,
}

impl PositiveSelection {
    pub fn features(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }
}

/// Greedy search for the features that bring the model closest to its
/// decision border at 0.5.
///
/// Starting from the empty vector, each round tries every remaining nonzero
/// feature of `x` (added at its original value to the current core, all other
/// coordinates zero) and adopts the one with the smallest `|f − 0.5|`, ties
/// going to the lowest id. A feature is adopted only if it strictly reduces
/// the current gap. Stops after `max_core_features` adoptions or when no
/// candidate improves.
pub fn select_core_features<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    cfg: &ExplainerConfig,
) -> Result<CoreSelection, ExplainError> {
    cfg.validate()?;
    f.check_dim(x)?;
    let empty = FeatureVector::zeros(x.dim());
    let mut sel = CoreSelection {
        initial_gap: (f.score(&empty)? - 0.5).abs(),
        steps: Vec::new(),
    };
    let mut current = empty;
    let mut gap = sel.initial_gap;
    let mut remaining: Vec<usize> = x.support().collect();

    while sel.steps.len() < cfg.max_core_features && !remaining.is_empty() {
        let candidates: Vec<FeatureVector> = remaining
            .iter()
            .map(|&i| {
                let mut c = current.clone();
                c.set(i, x.get(i)).expect("id taken from x's support");
                c
            })
            .collect();
        let scores = f.batch_score(&candidates)?;
        let mut best: Option<(usize, f64)> = None;
        for (pos, s) in scores.iter().enumerate() {
            let g = (s - 0.5).abs();
            if best.is_none_or(|(_, bg)| g < bg) {
                best = Some((pos, g));
            }
        }
        let Some((pos, best_gap)) = best else { break };
        if !(best_gap < gap) {
            break;
        }
        let feature = remaining.remove(pos);
        current = candidates.into_iter().nth(pos).expect("index within candidates");
        gap = best_gap;
        sel.steps.push(CoreStep { feature, gap });
    }
    Ok(sel)
}

/// Features of `x` outside the core whose single addition to the core moves
/// the score toward the full-sample score by more than
/// `cfg.contribution_epsilon`.
///
/// The direction is `sign(f(x) − f(x_c))`, falling back to `sign(f(x) − 0.5)`
/// when the two scores coincide.
pub fn select_positive_contributors<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    core: &[usize],
    cfg: &ExplainerConfig,
) -> Result<PositiveSelection, ExplainError> {
    cfg.validate()?;
    f.check_dim(x)?;
    let base = x.restrict(core);
    let core_score = f.score(&base)?;
    let full_score = f.score(x)?;
    let direction = match sign(full_score - core_score) {
        0.0 => sign(full_score - 0.5),
        d => d,
    };
    let rest: Vec<usize> = x.support().filter(|i| !core.contains(i)).collect();
    let candidates: Vec<FeatureVector> = rest
        .iter()
        .map(|&i| {
            let mut c = base.clone();
            c.set(i, x.get(i)).expect("id taken from x's support");
            c
        })
        .collect();
    let scores = f.batch_score(&candidates)?;
    let steps = rest
        .into_iter()
        .zip(scores)
        .filter_map(|(feature, s)| {
            let delta = s - core_score;
            (delta * direction > cfg.contribution_epsilon).then_some(PositiveStep { feature, delta })
        })
        .collect();
    Ok(PositiveSelection {
        core_score,
        full_score,
        direction,
        steps,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
