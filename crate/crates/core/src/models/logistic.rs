use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, ModelError, ScoreModel};
use crate::data::{Dataset, FeatureVector};

/// L2-regularized logistic regression, `score(x) = σ(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            lr: 0.1,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Per-epoch objective values recorded during training.
#[derive(Debug, Clone, Default)]
pub struct TrainingTrace {
    pub losses: Vec<f64>,
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn train(train: &Dataset, params: LogisticParams) -> Result<Self, ModelError> {
        Self::train_traced(train, params).map(|(m, _)| m)
    }

    /// Full-batch gradient descent on the mean log-loss plus `l2/2·‖w‖²`.
    ///
    /// Each epoch starts from step `lr` and halves it until the objective does
    /// not increase, so the recorded loss sequence is non-increasing. The seed
    /// drives a small random weight initialisation.
    pub fn train_traced(
        train: &Dataset,
        params: LogisticParams,
    ) -> Result<(Self, TrainingTrace), ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        if !(params.l2 >= 0.0 && params.l2.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("l2 = {}", params.l2)));
        }
        if !(params.lr > 0.0 && params.lr.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("lr = {}", params.lr)));
        }
        let dim = train.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let mut b = 0.0;
        let n = train.len() as f64;

        let objective = |w: &[f64], b: f64| -> f64 {
            let data_loss: f64 = train
                .samples
                .iter()
                .map(|s| {
                    let z = s.features.dot(w) + b;
                    // log(1 + e^z) - y z, computed stably
                    let softplus = if z > 0.0 {
                        z + (-z).exp().ln_1p()
                    } else {
                        z.exp().ln_1p()
                    };
                    softplus - f64::from(s.label) * z
                })
                .sum::<f64>()
                / n;
            data_loss + 0.5 * params.l2 * w.iter().map(|v| v * v).sum::<f64>()
        };

        let mut loss = objective(&w, b);
        let mut trace = TrainingTrace {
            losses: Vec::with_capacity(params.epochs),
        };
        let mut gw = vec![0.0; dim];
        let mut cand = vec![0.0; dim];
        for _ in 0..params.epochs {
            gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = params.l2 * wi);
            let mut gb = 0.0;
            for s in &train.samples {
                let r = (sigmoid(s.features.dot(&w) + b) - f64::from(s.label)) / n;
                for (i, v) in s.features.iter() {
                    gw[i] += r * v;
                }
                gb += r;
            }
            let mut step = params.lr;
            while step > 1e-12 {
                cand.iter_mut()
                    .zip(w.iter().zip(&gw))
                    .for_each(|(c, (wi, gi))| *c = wi - step * gi);
                let cb = b - step * gb;
                let cl = objective(&cand, cb);
                if cl <= loss {
                    std::mem::swap(&mut w, &mut cand);
                    b = cb;
                    loss = cl;
                    break;
                }
                step *= 0.5;
            }
            trace.losses.push(loss);
        }
        Ok((Self { weights: w, bias: b }, trace))
    }
}

impl ScoreModel for LogisticModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        Ok(sigmoid(self.logit(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        // label = 1 iff feature 0 present; feature 1 is always present.
        let text = "1 a b\n1 a b\n1 a\n0 b\n0 b\n0 c\n";
        Dataset::read_token_lists(text.as_bytes(), None).unwrap()
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let d = toy();
        let m = LogisticModel::train(&d, LogisticParams::default()).unwrap();
        let metrics = crate::models::evaluate_classifier(&m, &d).unwrap();
        assert_eq!(metrics.accuracy, 1.0);
        assert_eq!(metrics.tpr, 1.0);
        assert_eq!(metrics.fpr, 0.0);
    }

    #[test]
    fn loss_never_increases() {
        let d = toy();
        let (_, trace) = LogisticModel::train_traced(
            &d,
            LogisticParams {
                lr: 50.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace.losses.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn heavy_regularization_shrinks_weights() {
        let d = toy();
        let m = LogisticModel::train(
            &d,
            LogisticParams {
                l2: 1e6,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.weight_norm() < 1e-2, "{}", m.weight_norm());
    }

    #[test]
    fn deterministic_under_seed() {
        let d = toy();
        let p = LogisticParams {
            seed: 5,
            epochs: 20,
            ..Default::default()
        };
        assert_eq!(LogisticModel::train(&d, p).unwrap(), LogisticModel::train(&d, p).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = toy();
        let bad_lr = LogisticParams { lr: 0.0, ..Default::default() };
        assert!(LogisticModel::train(&d, bad_lr).is_err());
        let bad_l2 = LogisticParams { l2: -1.0, ..Default::default() };
        assert!(LogisticModel::train(&d, bad_l2).is_err());
        let empty = Dataset {
            samples: Vec::<Sample>::new(),
            vocabulary: d.vocabulary.clone(),
        };
        assert!(matches!(
            LogisticModel::train(&empty, LogisticParams::default()),
            Err(ModelError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn zero_model_scores_half() {
        let m = LogisticModel::new(vec![0.0; 4], 0.0);
        let x = FeatureVector::from_pairs(4, [(1, 3.0), (2, 0.5)]).unwrap();
        assert_eq!(m.score(&x).unwrap(), 0.5);
        assert!(m.score(&FeatureVector::zeros(5)).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_positive_weights(ws in prop::collection::vec(-3.0f64..3.0, 5),
                                        xs in prop::collection::vec(0.0f64..2.0, 5),
                                        i in 0usize..5, bump in 0.0f64..2.0) {
            let m = LogisticModel::new(ws.clone(), 0.1);
            let x = FeatureVector::from_dense(&xs).unwrap();
            let mut y = x.clone();
            y.set(i, xs[i] + bump).unwrap();
            let (a, b) = (m.score(&x).unwrap(), m.score(&y).unwrap());
            if ws[i] > 0.0 { prop_assert!(b >= a); }
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn batch_equals_elementwise(ws in prop::collection::vec(-3.0f64..3.0, 4),
                                    rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 0..8)) {
            let m = LogisticModel::new(ws, -0.2);
            let xs: Vec<FeatureVector> = rows.iter().map(|r| FeatureVector::from_dense(r).unwrap()).collect();
            let batch = m.batch_score(&xs).unwrap();
            for (x, b) in xs.iter().zip(batch) {
                prop_assert_eq!(m.score(x).unwrap().to_bits(), b.to_bits());
            }
        }
    }
}
