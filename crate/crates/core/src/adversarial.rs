//! Add-only evasion samples via a genetic algorithm.
//!
//! A candidate is a bit string over the addable features that are absent from
//! the base sample; a set bit activates that feature with value 1 (in raw
//! space, so encoded models renormalize). Fitness is the benign-class score
//! `1 − f(candidate)`. The search uses tournament-of-two selection, uniform
//! crossover, per-bit mutation and keeps the best individual unchanged in
//! every generation. Between equally fit candidates the one activating fewer
//! features wins. It stops at the first of: the generation cap, the best
//! fitness unchanged for `stable_rounds` generations, or the best fitness
//! exceeding `fitness_target`.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, FeatureVector};
use crate::models::{ModelError, ScoreModel};

const STABLE_EPS: f64 = 1e-12;
/// Attempts evaluated per parallel batch in [`build_attack_set`].
const ATTEMPT_BATCH: usize = 32;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("not a positive seed (score {0:.4} <= 0.5)")]
    NotPositiveSeed(f64),
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
    #[error("no addable feature is absent from the seed sample")]
    NothingToAdd,
    #[error("no seed sample is classified positive")]
    NoPositiveSeeds,
    #[error("no evasive sample found after {} attempts; {}", .0.len(), summarize(.0))]
    NoSuccess(Vec<AttemptDiagnostic>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("attack file line {line}: {message}")]
    Record { line: usize, message: String },
}

fn summarize(d: &[AttemptDiagnostic]) -> String {
    d.iter()
        .take(5)
        .map(|a| {
            format!(
                "seed {:?}: benign score {:.4} after {} generations{}",
                a.base_id,
                a.final_score,
                a.generations_used,
                a.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptDiagnostic {
    pub base_id: Option<usize>,
    pub final_score: f64,
    pub generations_used: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub addable_features: Vec<usize>,
    pub population_size: usize,
    pub max_generations: usize,
    pub stable_rounds: usize,
    pub fitness_target: f64,
    pub mutation_rate: f64,
    /// Probability that a bit is set in the initial population.
    pub init_density: f64,
    /// Upper bound on how often one seed is reused in [`build_attack_set`].
    pub attempts_per_seed: usize,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(addable_features: Vec<usize>) -> Self {
        Self {
            addable_features,
            population_size: 50,
            max_generations: 500,
            stable_rounds: 10,
            fitness_target: 0.99,
            mutation_rate: 0.01,
            init_density: 0.1,
            attempts_per_seed: 3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: String| Err(AttackError::InvalidConfig(m));
        if self.addable_features.is_empty() {
            return bad("addable_features is empty".into());
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate < 1.0) {
            return bad(format!("mutation_rate must lie in (0, 1), got {}", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.init_density) {
            return bad(format!("init_density must lie in [0, 1], got {}", self.init_density));
        }
        if self.population_size < 2 {
            return bad("population_size must be >= 2".into());
        }
        if self.max_generations == 0 || self.stable_rounds == 0 || self.attempts_per_seed == 0 {
            return bad("max_generations, stable_rounds and attempts_per_seed must be >= 1".into());
        }
        if !self.fitness_target.is_finite() {
            return bad("fitness_target must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSample {
    pub base_id: Option<usize>,
    /// The unmodified seed sample.
    pub base: FeatureVector,
    /// Features switched on by the attack, ascending.
    pub activated: Vec<usize>,
    /// Benign-class score `1 − f` of the final sample.
    pub final_score: f64,
    pub generations_used: usize,
    /// Best fitness after each generation.
    pub best_history: Vec<f64>,
}

impl AdversarialSample {
    pub fn evaded(&self) -> bool {
        self.final_score > 0.5
    }

    /// Base sample with the activated features added.
    pub fn sample(&self) -> FeatureVector {
        activate(&self.base, &self.activated)
    }

    pub fn to_record(&self) -> AttackRecord {
        AttackRecord {
            base_id: self.base_id,
            activated: self.activated.clone(),
            final_score: self.final_score,
            generations_used: self.generations_used,
        }
    }
}

/// One line of the attack-set JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub base_id: Option<usize>,
    pub activated: Vec<usize>,
    pub final_score: f64,
    pub generations_used: usize,
}

impl AttackRecord {
    /// Re-attaches the base sample from `data` (looked up by id).
    pub fn materialize(&self, data: &Dataset) -> Result<AdversarialSample, String> {
        let id = self.base_id.ok_or("record has no base_id")?;
        let base = data
            .sample(id)
            .ok_or_else(|| format!("base sample {id} not found in data"))?
            .features
            .clone();
        if let Some(&bad) = self.activated.iter().find(|&&i| i >= base.dim()) {
            return Err(format!("activated feature {bad} out of range"));
        }
        Ok(AdversarialSample {
            base_id: Some(id),
            base,
            activated: self.activated.clone(),
            final_score: self.final_score,
            generations_used: self.generations_used,
            best_history: Vec::new(),
        })
    }
}

pub fn write_jsonl<W: Write>(out: &mut W, samples: &[AdversarialSample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut *out, &s.to_record())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<AttackRecord>, AttackError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| AttackError::Record {
            line: n + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AttackError::Record {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn activate(base: &FeatureVector, ids: &[usize]) -> FeatureVector {
    let mut x = base.clone();
    for &i in ids {
        x.set(i, 1.0).expect("activated id within dimension");
    }
    x
}

/// Runs the genetic search from `seed_sample` using RNG stream 0.
pub fn generate<M: ScoreModel + ?Sized>(
    f: &M,
    seed_sample: &FeatureVector,
    cfg: &AttackConfig,
) -> Result<AdversarialSample, AttackError> {
    generate_on_stream(f, seed_sample, cfg, 0)
}

/// As [`generate`], drawing randomness from ChaCha stream `stream` under
/// `cfg.seed`.
pub fn generate_on_stream<M: ScoreModel + ?Sized>(
    f: &M,
    seed_sample: &FeatureVector,
    cfg: &AttackConfig,
    stream: u64,
) -> Result<AdversarialSample, AttackError> {
    cfg.validate()?;
    f.check_dim(seed_sample)?;
    let initial = f.score(seed_sample)?;
    if initial <= 0.5 {
        return Err(AttackError::NotPositiveSeed(initial));
    }
    let mut genes: Vec<usize> = cfg
        .addable_features
        .iter()
        .copied()
        .filter(|&i| i < seed_sample.dim() && !seed_sample.contains(i))
        .collect();
    genes.sort_unstable();
    genes.dedup();
    if genes.is_empty() {
        return Err(AttackError::NothingToAdd);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let n = genes.len();
    let decode = |g: &[bool]| -> Vec<usize> {
        genes.iter().zip(g).filter(|(_, &b)| b).map(|(&i, _)| i).collect()
    };
    let evaluate = |pop: &[Vec<bool>]| -> Result<Vec<f64>, ModelError> {
        let xs: Vec<FeatureVector> = pop.iter().map(|g| activate(seed_sample, &decode(g))).collect();
        Ok(f.batch_score(&xs)?.into_iter().map(|s| 1.0 - s).collect())
    };

    let mut population: Vec<Vec<bool>> = (0..cfg.population_size)
        .map(|_| (0..n).map(|_| rng.gen_bool(cfg.init_density)).collect())
        .collect();
    let mut fitness = evaluate(&population)?;
    let mut sizes = bit_counts(&population);
    let mut generation = 1;
    let mut history = Vec::new();
    let mut best_idx = fittest(&fitness, &sizes);
    let mut best = (population[best_idx].clone(), fitness[best_idx], sizes[best_idx]);
    history.push(best.1);
    let mut stable = 0;

    loop {
        if best.1 > cfg.fitness_target
            || generation >= cfg.max_generations
            || stable >= cfg.stable_rounds
        {
            break;
        }
        let mut next = Vec::with_capacity(cfg.population_size);
        next.push(best.0.clone());
        while next.len() < cfg.population_size {
            let a = tournament(&fitness, &sizes, &mut rng);
            let b = tournament(&fitness, &sizes, &mut rng);
            let child: Vec<bool> = (0..n)
                .map(|k| {
                    let bit = if rng.gen_bool(0.5) { population[a][k] } else { population[b][k] };
                    bit ^ rng.gen_bool(cfg.mutation_rate)
                })
                .collect();
            next.push(child);
        }
        population = next;
        fitness = evaluate(&population)?;
        sizes = bit_counts(&population);
        generation += 1;
        best_idx = fittest(&fitness, &sizes);
        let (fit, size) = (fitness[best_idx], sizes[best_idx]);
        stable = if fit - best.1 > STABLE_EPS { 0 } else { stable + 1 };
        if fitter(fit, size, best.1, best.2) {
            best = (population[best_idx].clone(), fit, size);
        }
        history.push(best.1);
    }

    Ok(AdversarialSample {
        base_id: None,
        base: seed_sample.clone(),
        activated: decode(&best.0),
        final_score: best.1,
        generations_used: generation,
        best_history: history,
    })
}

fn bit_counts(pop: &[Vec<bool>]) -> Vec<usize> {
    pop.iter().map(|g| g.iter().filter(|&&b| b).count()).collect()
}

fn fitter(fa: f64, na: usize, fb: f64, nb: usize) -> bool {
    fa > fb || (fa == fb && na < nb)
}

fn fittest(fitness: &[f64], sizes: &[usize]) -> usize {
    let mut best = 0;
    for i in 1..fitness.len() {
        if fitter(fitness[i], sizes[i], fitness[best], sizes[best]) {
            best = i;
        }
    }
    best
}

fn tournament(fitness: &[f64], sizes: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..fitness.len());
    let b = rng.gen_range(0..fitness.len());
    if fitter(fitness[b], sizes[b], fitness[a], sizes[a]) {
        b
    } else {
        a
    }
}

/// Outcome of [`build_attack_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSet {
    pub samples: Vec<AdversarialSample>,
    /// Attempts run, successful or not.
    pub attempts: usize,
    pub failures: Vec<AttemptDiagnostic>,
}

impl AttackSet {
    /// Evasive samples found per attempt.
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            return 0.0;
        }
        (self.attempts - self.failures.len()) as f64 / self.attempts as f64
    }
}

/// Generates up to `count` evasive samples from the positive-classified
/// samples of `seeds`.
///
/// Seeds are visited in a seeded random order, cycling through them up to
/// `attempts_per_seed` times; attempt `k` uses RNG stream `k`, so the output
/// is identical for any thread count. Returns fewer than `count` samples when
/// the attempts run out, and an error when none succeeded.
pub fn build_attack_set<M: ScoreModel + ?Sized>(
    f: &M,
    seeds: &Dataset,
    count: usize,
    cfg: &AttackConfig,
) -> Result<AttackSet, AttackError> {
    if count == 0 {
        return Ok(AttackSet {
            samples: Vec::new(),
            attempts: 0,
            failures: Vec::new(),
        });
    }
    cfg.validate()?;
    let xs: Vec<FeatureVector> = seeds.samples.iter().map(|s| s.features.clone()).collect();
    let scores = f.batch_score(&xs)?;
    let mut positive: Vec<usize> = (0..seeds.len()).filter(|&i| scores[i] > 0.5).collect();
    if positive.is_empty() {
        return Err(AttackError::NoPositiveSeeds);
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(u64::MAX);
    positive.shuffle(&mut order_rng);
    let attempts: Vec<usize> = (0..cfg.attempts_per_seed)
        .flat_map(|_| positive.iter().copied())
        .collect();

    let mut out = Vec::new();
    let mut failures = Vec::new();
    let mut done = 0;
    for (b, batch) in attempts.chunks(ATTEMPT_BATCH).enumerate() {
        let results: Vec<_> = batch
            .par_iter()
            .enumerate()
            .map(|(k, &si)| {
                let stream = (b * ATTEMPT_BATCH + k) as u64;
                let s = &seeds.samples[si];
                (s.id, generate_on_stream(f, &s.features, cfg, stream))
            })
            .collect();
        for (id, r) in results {
            if out.len() >= count {
                break;
            }
            done += 1;
            match r {
                Ok(mut adv) if adv.evaded() => {
                    adv.base_id = Some(id);
                    out.push(adv);
                }
                Ok(adv) => failures.push(AttemptDiagnostic {
                    base_id: Some(id),
                    final_score: adv.final_score,
                    generations_used: adv.generations_used,
                    error: None,
                }),
                Err(AttackError::Model(e)) => return Err(AttackError::Model(e)),
                Err(e) => failures.push(AttemptDiagnostic {
                    base_id: Some(id),
                    final_score: 1.0 - scores[si_of(seeds, id)],
                    generations_used: 0,
                    error: Some(e.to_string()),
                }),
            }
        }
        if out.len() >= count {
            break;
        }
    }
    if out.is_empty() {
        return Err(AttackError::NoSuccess(failures));
    }
    Ok(AttackSet {
        samples: out,
        attempts: done,
        failures,
    })
}

fn si_of(seeds: &Dataset, id: usize) -> usize {
    seeds.samples.iter().position(|s| s.id == id).unwrap_or(0)
}
