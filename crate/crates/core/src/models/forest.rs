//! Random forest of CART classification trees (Gini impurity).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, ScoreModel};
use crate::data::{Dataset, FeatureVector};

/// How many candidate features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeaturesPerSplit {
    /// `max(1, floor(sqrt(m)))`
    Sqrt,
    All,
    Fixed(usize),
}

impl FeaturesPerSplit {
    fn resolve(self, m: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((m as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => m,
            FeaturesPerSplit::Fixed(k) => k.clamp(1, m.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 10,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive: bool,
    },
}

/// Binary decision tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &FeatureVector) -> bool {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { positive } => return positive,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes.first()? {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Score = fraction of trees voting positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub dim: usize,
    pub max_depth: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForestModel {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Trains `tree_count` trees in parallel. Tree `t` draws from its own
    /// ChaCha stream `t` under `seed`, so results do not depend on threading.
    pub fn train(train: &Dataset, params: ForestParams) -> Result<Self, ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        if params.tree_count == 0 {
            return Err(ModelError::InvalidParameter("tree_count must be >= 1".into()));
        }
        if params.max_depth == 0 {
            return Err(ModelError::InvalidParameter("max_depth must be >= 1".into()));
        }
        let rows: Vec<(&FeatureVector, bool)> = train
            .samples
            .iter()
            .map(|s| (&s.features, s.label == 1))
            .collect();
        let dim = train.dim();
        let trees = (0..params.tree_count)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect()
                } else {
                    (0..rows.len()).collect()
                };
                let mut builder = TreeBuilder {
                    rows: &rows,
                    dim,
                    max_depth: params.max_depth,
                    per_split: params.features_per_split.resolve(dim),
                    rng,
                    nodes: Vec::new(),
                };
                builder.grow(idx, 0);
                DecisionTree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Ok(Self {
            dim,
            max_depth: params.max_depth,
            trees,
        })
    }
}

impl ScoreModel for RandomForestModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        Ok(votes as f64 / self.trees.len() as f64)
    }
}

struct TreeBuilder<'a> {
    rows: &'a [(&'a FeatureVector, bool)],
    dim: usize,
    max_depth: usize,
    per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.rows[i].1).count();
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            positive: 2 * pos > idx.len(),
        });
        if depth >= self.max_depth || pos == 0 || pos == idx.len() {
            return at;
        }
        let Some(choice) = self.best_split(&idx, pos) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i].0.get(choice.feature) <= choice.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: l,
            right: r,
        };
        at
    }

    /// Scans a random feature order. The first `per_split` features are always
    /// evaluated; if none of them reduces impurity the scan continues until
    /// one does.
    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<SplitChoice> {
        let parent = gini(pos, idx.len());
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<SplitChoice> = None;
        let mut vals: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
        for (k, &f) in order.iter().enumerate() {
            if k >= self.per_split && best.is_some() {
                break;
            }
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.rows[i].0.get(f), self.rows[i].1)));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            if vals[0].0 == vals[vals.len() - 1].0 {
                continue;
            }
            let n = vals.len();
            let mut left_pos = 0usize;
            for j in 0..n - 1 {
                left_pos += usize::from(vals[j].1);
                if vals[j].0 == vals[j + 1].0 {
                    continue;
                }
                let nl = j + 1;
                let nr = n - nl;
                let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr))
                    / n as f64;
                if impurity < parent - 1e-12
                    && best.as_ref().is_none_or(|b| impurity < b.impurity)
                {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: 0.5 * (vals[j].0 + vals[j + 1].0),
                        impurity,
                    });
                }
            }
        }
        best
    }
}
