use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExplainError;
use crate::data::FeatureVector;
use crate::models::ScoreModel;

/// Binary mask design over the selected features and the model's score on
/// each masked sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTrainingSet {
    /// Column order of the design.
    pub features: Vec<usize>,
    /// Row-major `rows × features.len()` matrix of 0/1 entries.
    pub masks: Vec<f64>,
    /// `f(masked sample)` per row.
    pub scores: Vec<f64>,
}

impl SurrogateTrainingSet {
    pub fn rows(&self) -> usize {
        self.scores.len()
    }

    pub fn cols(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.masks[r * self.cols()..(r + 1) * self.cols()]
    }
}

/// Builds `rows` masked copies of `x`.
///
/// Row 0 keeps every selected feature and row 1 none; the remaining rows keep
/// each selected feature independently with probability ½. A masked sample
/// holds the kept features at their original values and zeros everywhere
/// else (unselected features included).
pub fn build_surrogate_set<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    selected: &[usize],
    rows: usize,
    seed: u64,
) -> Result<SurrogateTrainingSet, ExplainError> {
    if selected.is_empty() {
        return Err(ExplainError::NothingToAttribute);
    }
    if rows < 2 {
        return Err(ExplainError::InvalidConfig(format!(
            "surrogate set needs at least 2 rows, got {rows}"
        )));
    }
    f.check_dim(x)?;
    let p = selected.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Vec::with_capacity(rows * p);
    masks.extend(std::iter::repeat_n(1.0, p));
    masks.extend(std::iter::repeat_n(0.0, p));
    for _ in 2..rows {
        masks.extend((0..p).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }));
    }
    let samples: Vec<FeatureVector> = masks
        .chunks(p)
        .map(|m| {
            let kept: Vec<usize> = selected
                .iter()
                .zip(m)
                .filter(|(_, &bit)| bit == 1.0)
                .map(|(&id, _)| id)
                .collect();
            x.restrict(&kept)
        })
        .collect();
    let scores = f.batch_score(&samples)?;
    Ok(SurrogateTrainingSet {
        features: selected.to_vec(),
        masks,
        scores,
    })
}
