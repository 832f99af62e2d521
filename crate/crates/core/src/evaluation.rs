//! Explanation fidelity metrics and baseline explainers.
//!
//! Feature manipulations order the support of a sample by attribution
//! (features outside an explanation count as 0), largest first, ties by lower
//! id. "Remove" sets a coordinate to 0, "activate" copies the source value.
//! PCR is the fraction of manipulated samples the model classifies positive:
//! for deduction that is the fraction that kept their malicious label, for
//! augmentation the fraction of benign samples turned malicious.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::AdversarialSample;
use crate::data::{Dataset, FeatureVector};
use crate::explainer::{
    explain, Attribution, AttributionReport, ExplainError, ExplainerConfig, SelectionTrace,
    SurrogateDiagnostics,
};
use crate::models::{ModelError, ScoreModel};
use crate::ridge::weighted_ridge_fit;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no eligible samples: {0}")]
    NoEligibleSamples(String),
    #[error("sample {id:?}: {source}")]
    Sample {
        id: Option<usize>,
        #[source]
        source: ExplainError,
    },
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub perturbations: usize,
    /// Kernel width; `None` means `0.75·√|support|`.
    pub kernel_width: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            perturbations: 1000,
            kernel_width: None,
            alpha: 1.0,
            seed: 0,
        }
    }
}

/// An attribution method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    PhilaeX(ExplainerConfig),
    /// I.i.d. `U(−1, 1)` attributions over the support.
    Random { seed: u64 },
    /// Kernel-weighted ridge on random masks over the full support.
    Lime(LimeConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::PhilaeX(_) => "philaex",
            Method::Random { .. } => "random",
            Method::Lime(_) => "lime",
        }
    }

    /// Builds a method from its name; every method draws from `seed`.
    pub fn parse(name: &str, philaex: ExplainerConfig, seed: u64) -> Result<Self, EvalError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "philaex" => Ok(Method::PhilaeX(ExplainerConfig { seed, ..philaex })),
            "random" => Ok(Method::Random { seed }),
            "lime" | "lime-style" => Ok(Method::Lime(LimeConfig {
                seed,
                ..LimeConfig::default()
            })),
            other => Err(EvalError::InvalidParameter(format!(
                "unknown method '{other}' (expected philaex, random or lime)"
            ))),
        }
    }

    /// Explains `x`. `stream` separates the random draws of different samples
    /// for the baselines; PhilaeX ignores it.
    pub fn explain<M: ScoreModel + ?Sized>(
        &self,
        f: &M,
        x: &FeatureVector,
        stream: u64,
    ) -> Result<AttributionReport, ExplainError> {
        match self {
            Method::PhilaeX(cfg) => explain(f, x, cfg),
            Method::Random { seed } => random_explain(f, x, *seed, stream),
            Method::Lime(cfg) => lime_explain(f, x, cfg, stream),
        }
    }
}

fn baseline_report(original_score: f64, selected: Vec<Attribution>, intercept: f64) -> AttributionReport {
    AttributionReport {
        sample_id: None,
        original_score,
        selected,
        intercept,
        core: Vec::new(),
        positive: Vec::new(),
        trace: SelectionTrace::default(),
        diagnostics: SurrogateDiagnostics::default(),
    }
}

fn random_explain<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    seed: u64,
    stream: u64,
) -> Result<AttributionReport, ExplainError> {
    f.check_dim(x)?;
    let score = f.score(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let selected = x
        .support()
        .map(|feature_id| Attribution {
            feature_id,
            name: None,
            attribution: rng.gen_range(-1.0..1.0),
        })
        .collect();
    Ok(baseline_report(score, selected, 0.0))
}

fn lime_explain<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    cfg: &LimeConfig,
    stream: u64,
) -> Result<AttributionReport, ExplainError> {
    f.check_dim(x)?;
    let score = f.score(x)?;
    let orient = if score > 0.5 { 1.0 } else { -1.0 };
    let support: Vec<usize> = x.support().collect();
    let p = support.len();
    if p == 0 {
        let base = f.score(&FeatureVector::zeros(x.dim()))?;
        return Ok(baseline_report(score, Vec::new(), if orient > 0.0 { base } else { 1.0 - base }));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (p as f64).sqrt());
    if !(width.is_finite() && width > 0.0) {
        return Err(ExplainError::InvalidConfig(format!("kernel width must be > 0, got {width}")));
    }
    let rows = cfg.perturbations.max(p + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut masks = Vec::with_capacity(rows * p);
    masks.extend(std::iter::repeat_n(1.0, p));
    for _ in 1..rows {
        masks.extend((0..p).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }));
    }
    let samples: Vec<FeatureVector> = masks
        .chunks(p)
        .map(|m| {
            let kept: Vec<usize> = support
                .iter()
                .zip(m)
                .filter(|(_, &b)| b == 1.0)
                .map(|(&i, _)| i)
                .collect();
            x.restrict(&kept)
        })
        .collect();
    let scores = f.batch_score(&samples)?;
    let weights: Vec<f64> = masks
        .chunks(p)
        .map(|m| {
            let removed = m.iter().filter(|&&b| b == 0.0).count() as f64;
            (-removed / (width * width)).exp()
        })
        .collect();
    let fit = weighted_ridge_fit(&masks, rows, p, &scores, &weights, cfg.alpha)?;
    let selected = support
        .iter()
        .zip(&fit.weights)
        .map(|(&feature_id, &w)| Attribution {
            feature_id,
            name: None,
            attribution: orient * w,
        })
        .collect();
    let intercept = if orient > 0.0 { fit.intercept } else { 1.0 - fit.intercept };
    Ok(baseline_report(score, selected, intercept))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    GoodExplanation,
    Deduction,
    Augmentation,
}

impl EvalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::GoodExplanation => "good-explanation",
            EvalMode::Deduction => "deduction",
            EvalMode::Augmentation => "augmentation",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "good-explanation" => Ok(EvalMode::GoodExplanation),
            "deduction" => Ok(EvalMode::Deduction),
            "augmentation" => Ok(EvalMode::Augmentation),
            _ => Err(format!("unknown mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub parameter: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCurve {
    pub metric: String,
    pub method: String,
    pub mode: EvalMode,
    pub points: Vec<CurvePoint>,
}

impl EvaluationCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn value_at(&self, parameter: f64) -> Option<f64> {
        self.points.iter().find(|p| p.parameter == parameter).map(|p| p.value)
    }
}

/// Writes `parameter,metric,method,mode` rows for every point of `curves`.
pub fn write_curves_csv<W: Write>(out: W, curves: &[EvaluationCurve]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "metric", "method", "mode"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                p.parameter.to_string(),
                p.value.to_string(),
                c.method.clone(),
                c.mode.to_string(),
            ])?;
        }
    }
    w.flush()
}

fn check_increasing(ps: &[f64], what: &str) -> Result<(), EvalError> {
    if ps.is_empty() {
        return Err(EvalError::InvalidParameter(format!("no {what} given")));
    }
    if ps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EvalError::InvalidParameter(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodExplanationRate {
    pub threshold: f64,
    /// Share of samples whose positively attributed activated features make up
    /// at least `threshold` of the activated set.
    pub rate: f64,
    /// Share of samples with at least one positively attributed activated
    /// feature.
    pub at_least_one_rate: f64,
    pub counted: usize,
    /// Samples left out because nothing was activated.
    pub excluded_empty: usize,
}

fn positive_fraction(adv: &AdversarialSample, report: &AttributionReport) -> Option<f64> {
    if adv.activated.is_empty() {
        return None;
    }
    let pos = adv
        .activated
        .iter()
        .filter(|&&i| report.attribution(i) > 0.0)
        .count();
    Some(pos as f64 / adv.activated.len() as f64)
}

pub fn good_explanation_rate(
    pairs: &[(&AdversarialSample, &AttributionReport)],
    threshold: f64,
) -> Result<GoodExplanationRate, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidParameter(format!("threshold {threshold} outside [0, 1]")));
    }
    let fractions: Vec<f64> = pairs.iter().filter_map(|(a, r)| positive_fraction(a, r)).collect();
    let counted = fractions.len();
    if counted == 0 {
        return Err(EvalError::NoEligibleSamples("every adversarial sample has an empty activated set".into()));
    }
    let n = counted as f64;
    Ok(GoodExplanationRate {
        threshold,
        rate: fractions.iter().filter(|&&q| q >= threshold).count() as f64 / n,
        at_least_one_rate: fractions.iter().filter(|&&q| q > 0.0).count() as f64 / n,
        counted,
        excluded_empty: pairs.len() - counted,
    })
}

pub fn good_explanation_curve(
    pairs: &[(&AdversarialSample, &AttributionReport)],
    thresholds: &[f64],
    method: &str,
) -> Result<EvaluationCurve, EvalError> {
    check_increasing(thresholds, "thresholds")?;
    let points = thresholds
        .iter()
        .map(|&t| {
            good_explanation_rate(pairs, t).map(|r| CurvePoint {
                parameter: t,
                value: r.rate,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(EvaluationCurve {
        metric: "good_explanation_rate".into(),
        method: method.into(),
        mode: EvalMode::GoodExplanation,
        points,
    })
}

/// Result of one feature manipulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Manipulation {
    pub positive: bool,
    pub score: f64,
    /// Features removed or activated, in order.
    pub features: Vec<usize>,
    /// More features were requested than the explanation selected.
    pub exceeded_selection: bool,
    /// Every selected attribution is zero, so the order is by id.
    pub degenerate: bool,
}

/// Support of `x` ordered by attribution (0 outside the report), descending,
/// ties by ascending id.
pub fn manipulation_order(report: &AttributionReport, x: &FeatureVector) -> Vec<usize> {
    let att: HashMap<usize, f64> = report
        .selected
        .iter()
        .map(|a| (a.feature_id, a.attribution))
        .collect();
    let mut ids: Vec<usize> = x.support().collect();
    ids.sort_by(|&a, &b| {
        let (va, vb) = (att.get(&a).copied().unwrap_or(0.0), att.get(&b).copied().unwrap_or(0.0));
        vb.total_cmp(&va).then(a.cmp(&b))
    });
    ids
}

fn degenerate(report: &AttributionReport) -> bool {
    report.selected.iter().all(|a| a.attribution == 0.0)
}

/// Zeroes the `k` top-attributed features of a positive sample.
///
/// `k` beyond the selection continues through the unattributed support and is
/// flagged; `k` beyond the support removes the whole support.
pub fn deduction_test<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    report: &AttributionReport,
    k: usize,
) -> Result<Manipulation, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidParameter("deduction needs k >= 1".into()));
    }
    let s = f.score(x)?;
    if s <= 0.5 {
        return Err(EvalError::Precondition(format!("deduction needs a positive sample, score {s:.4}")));
    }
    Ok(deduce(f, x, report, k)?)
}

fn deduce<M: ScoreModel + ?Sized>(
    f: &M,
    x: &FeatureVector,
    report: &AttributionReport,
    k: usize,
) -> Result<Manipulation, ModelError> {
    let mut order = manipulation_order(report, x);
    order.truncate(k);
    let mut m = x.clone();
    for &i in &order {
        m.remove(i);
    }
    let score = f.score(&m)?;
    Ok(Manipulation {
        positive: score > 0.5,
        score,
        features: order,
        exceeded_selection: k > report.selected.len(),
        degenerate: degenerate(report),
    })
}

/// Copies the `k` top-attributed features of a positive `source` into a
/// benign sample. `k = 0` leaves the sample unchanged.
pub fn augmentation_test<M: ScoreModel + ?Sized>(
    f: &M,
    benign: &FeatureVector,
    source_report: &AttributionReport,
    source: &FeatureVector,
    k: usize,
) -> Result<Manipulation, EvalError> {
    if !source_report.predicted_positive() {
        return Err(EvalError::Precondition("augmentation source is not classified positive".into()));
    }
    let s = f.score(benign)?;
    if s > 0.5 {
        return Err(EvalError::Precondition(format!("augmentation target is not benign, score {s:.4}")));
    }
    if benign.dim() != source.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: benign.dim(),
            found: source.dim(),
        }
        .into());
    }
    Ok(augment(f, benign, source_report, source, k)?)
}

fn augment<M: ScoreModel + ?Sized>(
    f: &M,
    benign: &FeatureVector,
    source_report: &AttributionReport,
    source: &FeatureVector,
    k: usize,
) -> Result<Manipulation, ModelError> {
    let mut order = manipulation_order(source_report, source);
    order.truncate(k);
    let mut m = benign.clone();
    for &i in &order {
        m.set(i, source.get(i)).expect("id from a same-dimension vector");
    }
    let score = f.score(&m)?;
    Ok(Manipulation {
        positive: score > 0.5,
        score,
        features: order,
        exceeded_selection: k > source_report.selected.len(),
        degenerate: degenerate(source_report),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcrResult {
    pub curve: EvaluationCurve,
    /// Samples manipulated at each k.
    pub evaluated: usize,
    /// Ids of samples dropped because their explanation selected nothing.
    pub excluded_empty: Vec<usize>,
    /// Per k, how many manipulations went past the explanation's selection.
    pub exceeded_selection: Vec<usize>,
}

/// Explains every sample of `data` with `method` in parallel; sample `i`
/// (position in `data`) uses stream `i`.
pub fn explain_all<M: ScoreModel + ?Sized>(
    f: &M,
    data: &Dataset,
    method: &Method,
) -> Result<Vec<AttributionReport>, EvalError> {
    data.samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            method
                .explain(f, &s.features, i as u64)
                .map(|r| r.with_sample_id(s.id))
                .map_err(|source| EvalError::Sample { id: Some(s.id), source })
        })
        .collect()
}

/// PCR for each k.
///
/// Deduction manipulates every positive-classified sample of `data`.
/// Augmentation manipulates every benign-classified sample, pairing the j-th
/// with the j-th positive-classified one (cycling) as source.
pub fn pcr_curve<M: ScoreModel + ?Sized>(
    f: &M,
    data: &Dataset,
    method: &Method,
    mode: EvalMode,
    ks: &[usize],
) -> Result<PcrResult, EvalError> {
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    check_increasing(&kf, "ks")?;
    if mode == EvalMode::GoodExplanation {
        return Err(EvalError::InvalidParameter("PCR is defined for deduction and augmentation".into()));
    }
    if mode == EvalMode::Deduction && ks[0] == 0 {
        return Err(EvalError::InvalidParameter("deduction needs k >= 1".into()));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let xs: Vec<FeatureVector> = data.samples.iter().map(|s| s.features.clone()).collect();
    let scores = f.batch_score(&xs)?;
    let positives = Dataset {
        samples: (0..data.len())
            .filter(|&i| scores[i] > 0.5)
            .map(|i| data.samples[i].clone())
            .collect(),
        vocabulary: data.vocabulary.clone(),
    };
    if positives.is_empty() {
        return Err(EvalError::NoEligibleSamples("no sample is classified positive".into()));
    }
    let reports = explain_all(f, &positives, method)?;
    let mut excluded_empty = Vec::new();
    let mut sources = Vec::new();
    for (s, r) in positives.samples.iter().zip(&reports) {
        if r.selected.is_empty() {
            excluded_empty.push(s.id);
        } else {
            sources.push((&s.features, r));
        }
    }
    if sources.is_empty() {
        return Err(EvalError::NoEligibleSamples("every explanation selected no features".into()));
    }

    let jobs: Vec<(&FeatureVector, &AttributionReport, Option<&FeatureVector>)> = match mode {
        EvalMode::Deduction => sources.iter().map(|&(x, r)| (x, r, None)).collect(),
        _ => {
            let benign: Vec<&FeatureVector> = (0..data.len())
                .filter(|&i| scores[i] <= 0.5)
                .map(|i| &data.samples[i].features)
                .collect();
            if benign.is_empty() {
                return Err(EvalError::NoEligibleSamples("no sample is classified benign".into()));
            }
            benign
                .iter()
                .enumerate()
                .map(|(j, &b)| {
                    let (src, r) = sources[j % sources.len()];
                    (src, r, Some(b))
                })
                .collect()
        }
    };

    let outcomes: Vec<Vec<Manipulation>> = jobs
        .par_iter()
        .map(|&(x, r, target)| {
            ks.iter()
                .map(|&k| match target {
                    None => deduce(f, x, r, k),
                    Some(b) => augment(f, b, r, x, k),
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let n = outcomes.len() as f64;
    let points = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| CurvePoint {
            parameter: k as f64,
            value: outcomes.iter().filter(|o| o[j].positive).count() as f64 / n,
        })
        .collect();
    let exceeded_selection = (0..ks.len())
        .map(|j| outcomes.iter().filter(|o| o[j].exceeded_selection).count())
        .collect();
    Ok(PcrResult {
        curve: EvaluationCurve {
            metric: "pcr".into(),
            method: method.name().into(),
            mode,
            points,
        },
        evaluated: outcomes.len(),
        excluded_empty,
        exceeded_selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::models::LogisticModel;

    fn report(score: f64, att: &[(usize, f64)]) -> AttributionReport {
        baseline_report(
            score,
            att.iter()
                .map(|&(feature_id, attribution)| Attribution {
                    feature_id,
                    name: None,
                    attribution,
                })
                .collect(),
            0.0,
        )
    }

    fn adv(activated: Vec<usize>) -> AdversarialSample {
        AdversarialSample {
            base_id: Some(0),
            base: FeatureVector::zeros(8),
            activated,
            final_score: 0.9,
            generations_used: 1,
            best_history: vec![],
        }
    }

    #[test]
    fn good_explanation_boundaries() {
        let a = adv(vec![1, 2, 3, 4]);
        let r = report(0.2, &[(1, 0.3), (2, 0.1), (3, -0.2)]);
        let pairs = [(&a, &r)];
        assert_eq!(good_explanation_rate(&pairs, 0.5).unwrap().rate, 1.0);
        assert_eq!(good_explanation_rate(&pairs, 0.6).unwrap().rate, 0.0);
        let none = report(0.2, &[]);
        let g = good_explanation_rate(&[(&a, &none)], 0.0).unwrap();
        assert_eq!((g.rate, g.at_least_one_rate), (1.0, 0.0));
    }

    #[test]
    fn good_explanation_exclusions_and_errors() {
        let a = adv(vec![1]);
        let e = adv(vec![]);
        let r = report(0.2, &[(1, 0.5)]);
        let g = good_explanation_rate(&[(&a, &r), (&e, &r)], 0.9).unwrap();
        assert_eq!((g.counted, g.excluded_empty, g.rate), (1, 1, 1.0));
        assert!(matches!(good_explanation_rate(&[], 0.1), Err(EvalError::EmptyInput)));
        assert!(good_explanation_rate(&[(&e, &r)], 0.1).is_err());
        assert!(good_explanation_rate(&[(&a, &r)], 1.5).is_err());
    }

    #[test]
    fn good_explanation_curve_is_non_increasing() {
        let advs: Vec<_> = (1..8).map(|n| adv((0..n).collect())).collect();
        let reps: Vec<_> = (1..8)
            .map(|n| report(0.1, &(0..n).map(|i| (i, if i % 2 == 0 { 1.0 } else { -1.0 })).collect::<Vec<_>>()))
            .collect();
        let pairs: Vec<_> = advs.iter().zip(&reps).collect();
        let ts: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let c = good_explanation_curve(&pairs, &ts, "x").unwrap();
        assert_eq!(c.points.len(), 10);
        assert!(c.values().windows(2).all(|w| w[1] <= w[0]));
        assert!(good_explanation_curve(&pairs, &[0.5, 0.5], "x").is_err());
    }

    fn additive() -> LogisticModel {
        LogisticModel::new(vec![6.0, 0.5, 0.5, 0.2, -1.0], -2.0)
    }

    #[test]
    fn deduction_removes_the_dominant_feature() {
        let f = additive();
        let x = FeatureVector::from_dense(&[1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let r = explain(&f, &x, &ExplainerConfig::default()).unwrap();
        let m = deduction_test(&f, &x, &r, 1).unwrap();
        assert_eq!(m.features, vec![0]);
        assert!(!m.positive);
        let all = deduction_test(&f, &x, &r, 100).unwrap();
        assert!(all.exceeded_selection && !all.positive);
        assert_eq!(all.features.len(), 4);
    }

    #[test]
    fn deduction_preconditions_and_degenerate_order() {
        let f = additive();
        let x = FeatureVector::from_dense(&[1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = report(0.9, &[(0, 0.0), (2, 0.0)]);
        assert!(deduction_test(&f, &x, &r, 0).is_err());
        let m = deduction_test(&f, &x, &r, 2).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.features, vec![0, 2]);
        let benign = FeatureVector::from_dense(&[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(deduction_test(&f, &benign, &r, 1), Err(EvalError::Precondition(_))));
    }

    #[test]
    fn augmentation_copies_the_planted_feature() {
        let f = additive();
        let source = FeatureVector::from_dense(&[1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = explain(&f, &source, &ExplainerConfig::default()).unwrap();
        let benign = FeatureVector::from_dense(&[0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let m = augmentation_test(&f, &benign, &r, &source, 1).unwrap();
        assert_eq!(m.features, vec![0]);
        assert!(m.positive);
        let none = augmentation_test(&f, &benign, &r, &source, 0).unwrap();
        assert!(!none.positive && none.features.is_empty());
        assert_eq!(none.score, f.score(&benign).unwrap());
        // the benign sample already holds the copied features
        let holder = FeatureVector::from_dense(&[0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let r2 = report(0.9, &[(1, 1.0)]);
        let same = augmentation_test(&f, &holder, &r2, &source, 1).unwrap();
        assert_eq!(same.score, f.score(&holder).unwrap());
    }

    fn dataset(rows: &[(&[f64], u8)]) -> Dataset {
        Dataset {
            samples: rows
                .iter()
                .enumerate()
                .map(|(id, (v, label))| Sample {
                    id,
                    features: FeatureVector::from_dense(v).unwrap(),
                    label: *label,
                })
                .collect(),
            vocabulary: crate::data::Vocabulary::from_names((0..rows[0].0.len()).map(|i| format!("f{i}"))),
        }
    }

    #[test]
    fn pcr_curve_structure_and_limit() {
        let f = additive();
        let d = dataset(&[
            (&[1.0, 1.0, 1.0, 1.0, 0.0], 1),
            (&[1.0, 0.0, 0.0, 1.0, 1.0], 1),
            (&[0.0, 1.0, 1.0, 1.0, 0.0], 0),
            (&[0.0, 0.0, 0.0, 0.0, 1.0], 0),
        ]);
        let m = Method::PhilaeX(ExplainerConfig::default());
        let r = pcr_curve(&f, &d, &m, EvalMode::Deduction, &[1, 2, 50]).unwrap();
        assert_eq!(r.curve.points.iter().map(|p| p.parameter).collect::<Vec<_>>(), vec![1.0, 2.0, 50.0]);
        assert_eq!(r.evaluated, 2);
        // everything removed: f(0) = σ(−2) < 0.5
        assert_eq!(r.curve.value_at(50.0), Some(0.0));
        let a = pcr_curve(&f, &d, &m, EvalMode::Augmentation, &[0, 1, 3]).unwrap();
        assert_eq!(a.curve.value_at(0.0), Some(0.0));
        assert_eq!(a.curve.value_at(1.0), Some(1.0));
        assert!(pcr_curve(&f, &d, &m, EvalMode::Deduction, &[2, 1]).is_err());
        assert!(pcr_curve(&f, &d, &m, EvalMode::Deduction, &[0, 1]).is_err());
    }

    #[test]
    fn baselines_cover_the_support() {
        let f = additive();
        let x = FeatureVector::from_dense(&[1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        for m in [Method::Random { seed: 3 }, Method::Lime(LimeConfig::default())] {
            let r = m.explain(&f, &x, 0).unwrap();
            assert_eq!(r.selected_ids(), vec![0, 2, 3]);
            assert_eq!(r, m.explain(&f, &x, 0).unwrap());
        }
        let lime = Method::Lime(LimeConfig::default()).explain(&f, &x, 0).unwrap();
        assert_eq!(lime.ranked()[0], 0);
        let r1 = Method::Random { seed: 3 }.explain(&f, &x, 1).unwrap();
        assert_ne!(r1, Method::Random { seed: 3 }.explain(&f, &x, 0).unwrap());
    }

    #[test]
    fn method_names_parse() {
        let c = ExplainerConfig::default();
        for n in ["philaex", "random", "lime"] {
            assert_eq!(Method::parse(n, c, 0).unwrap().name(), n);
        }
        assert!(Method::parse("shap", c, 0).is_err());
    }

    #[test]
    fn curve_csv_layout() {
        let c = EvaluationCurve {
            metric: "pcr".into(),
            method: "random".into(),
            mode: EvalMode::Deduction,
            points: vec![CurvePoint { parameter: 1.0, value: 0.25 }],
        };
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[c]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "parameter,metric,method,mode\n1,0.25,random,deduction\n");
    }
}
