//! Model-agnostic feature attribution for binary classifiers.
//!
//! The crate explains individual predictions of any scorer `f(x) → [0, 1]`
//! by selecting the features that matter (borderline core features plus
//! positive individual contributors) and quantifying them with a ridge
//! surrogate fit on masked copies of the sample. Around that sits tooling to
//! train baseline classifiers, generate add-only evasion samples with a
//! genetic algorithm, and measure explanation fidelity.

pub mod adversarial;
pub mod data;
pub mod evaluation;
pub mod explainer;
pub mod models;
pub mod ridge;
pub mod synth;

pub use data::{DataFormat, Dataset, FeatureVector, Sample, TfIdfEncoder, Vocabulary};
pub use explainer::{explain, AttributionReport, ExplainerConfig};
pub use models::ScoreModel;
