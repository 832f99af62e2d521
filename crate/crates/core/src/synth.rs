//! Synthetic binary-feature malware/benign corpora.
//!
//! The generator mimics the shape of structural PDF-malware feature sets:
//! a fixed number of binary features, some of which mark malicious files,
//! some benign ones, the rest shared noise. Feature roles are assigned to a
//! seeded random permutation of the ids so that no id order carries meaning.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureVector, Sample, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    /// More frequent in malicious samples.
    Malicious,
    /// More frequent in benign samples.
    Benign,
    /// Same frequency in both classes.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfStyleConfig {
    pub n_malicious: usize,
    pub n_benign: usize,
    pub n_features: usize,
    pub malicious_markers: usize,
    pub benign_markers: usize,
    /// Presence probability of a marker in its own class.
    pub marker_rate: f64,
    /// Presence probability of a marker in the other class.
    pub cross_rate: f64,
    pub seed: u64,
}

impl Default for PdfStyleConfig {
    fn default() -> Self {
        Self {
            n_malicious: 4_999,
            n_benign: 5_000,
            n_features: 135,
            malicious_markers: 25,
            benign_markers: 25,
            marker_rate: 0.4,
            cross_rate: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub roles: Vec<FeatureRole>,
}

impl SyntheticCorpus {
    pub fn ids_with_role(&self, role: FeatureRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&i| self.roles[i] == role).collect()
    }
}

/// Generates a labelled corpus; malicious samples come first in id order.
pub fn pdf_style(cfg: &PdfStyleConfig) -> SyntheticCorpus {
    assert!(
        cfg.malicious_markers + cfg.benign_markers <= cfg.n_features,
        "more markers than features"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids: Vec<usize> = (0..cfg.n_features).collect();
    ids.shuffle(&mut rng);
    let mut roles = vec![FeatureRole::Shared; cfg.n_features];
    for &i in &ids[..cfg.malicious_markers] {
        roles[i] = FeatureRole::Malicious;
    }
    for &i in &ids[cfg.malicious_markers..cfg.malicious_markers + cfg.benign_markers] {
        roles[i] = FeatureRole::Benign;
    }
    let shared_rate: Vec<f64> = (0..cfg.n_features).map(|_| rng.gen_range(0.05..0.4)).collect();

    let vocabulary = Vocabulary::from_names((0..cfg.n_features).map(|i| format!("f{i:03}")));
    let total = cfg.n_malicious + cfg.n_benign;
    let samples = (0..total)
        .map(|id| {
            let label = u8::from(id < cfg.n_malicious);
            let pairs = (0..cfg.n_features).filter_map(|f| {
                let p = match (roles[f], label) {
                    (FeatureRole::Malicious, 1) | (FeatureRole::Benign, 0) => cfg.marker_rate,
                    (FeatureRole::Malicious, _) | (FeatureRole::Benign, _) => cfg.cross_rate,
                    (FeatureRole::Shared, _) => shared_rate[f],
                };
                rng.gen_bool(p).then_some((f, 1.0))
            });
            Sample {
                id,
                features: FeatureVector::from_pairs(cfg.n_features, pairs).expect("ids in range"),
                label,
            }
        })
        .collect();
    SyntheticCorpus {
        dataset: Dataset {
            samples,
            vocabulary,
        },
        roles,
    }
}
