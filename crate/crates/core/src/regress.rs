//! Random-forest regression: bagged CART trees with per-split feature
//! subsampling.
//!
//! Each tree is grown on a bootstrap resample of the training rows. At every
//! node a random subset of `max_features` candidate features is scanned and
//! the threshold with the lowest summed squared error of the two children is
//! kept. Thresholds sit halfway between consecutive distinct values. Leaves
//! predict the mean target of the training rows that reach them, and the
//! forest averages its trees.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("{features} feature rows but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model decoding failed: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, RegressError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(d / 3)`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 5,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn features_per_split(&self, d: usize) -> Result<usize> {
        let m = self.max_features.unwrap_or(d.div_ceil(3));
        if m == 0 || m > d {
            return Err(RegressError::InvalidConfig(format!(
                "max_features = {m} must lie in 1..={d}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Flat node array; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value, n_samples: 1 }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub config: ForestConfig,
    pub input_dim: usize,
}

impl Forest {
    pub fn fit(features: &DMatrix<f64>, targets: &[f64], config: &ForestConfig) -> Result<Self> {
        fit(features, targets, config)
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict(self, features)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| RegressError::Decode(e.to_string()))
    }
}

pub fn fit(features: &DMatrix<f64>, targets: &[f64], config: &ForestConfig) -> Result<Forest> {
    let (n, d) = features.shape();
    if n != targets.len() {
        return Err(RegressError::LengthMismatch {
            features: n,
            targets: targets.len(),
        });
    }
    if n < 2 {
        return Err(RegressError::TooFewRows(n));
    }
    if d == 0 {
        return Err(RegressError::InvalidConfig("feature matrix has no columns".into()));
    }
    if config.n_trees == 0 || config.min_samples_leaf == 0 {
        return Err(RegressError::InvalidConfig(
            "n_trees and min_samples_leaf must be positive".into(),
        ));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite("features"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite("targets"));
    }
    let mtry = config.features_per_split(d)?;

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let tree_seeds: Vec<u64> = (0..config.n_trees).map(|_| master.random()).collect();
    let columns: Vec<&[f64]> = (0..d).map(|j| &features.as_slice()[j * n..(j + 1) * n]).collect();

    let trees = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder {
                columns: &columns,
                targets,
                mtry,
                min_leaf: config.min_samples_leaf,
                max_depth: config.max_depth,
                rng,
                nodes: Vec::new(),
                pairs: Vec::with_capacity(n),
            }
            .build(rows)
        })
        .collect();

    Ok(Forest {
        trees,
        config: config.clone(),
        input_dim: d,
    })
}

/// Mean of per-tree predictions, accumulated in tree order.
pub fn predict(forest: &Forest, features: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (m, d) = features.shape();
    if d != forest.input_dim {
        return Err(RegressError::DimensionMismatch {
            expected: forest.input_dim,
            got: d,
        });
    }
    let n_trees = forest.trees.len() as f64;
    Ok((0..m)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |row, i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = features[(i, j)];
                }
                forest.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / n_trees
            },
        )
        .collect())
}

struct TreeBuilder<'a> {
    columns: &'a [&'a [f64]],
    targets: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    pairs: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    fn build(mut self, rows: Vec<usize>) -> RegressionTree {
        let mut rows = rows;
        // (start, end, depth, node slot)
        let mut stack = vec![(0usize, rows.len(), 0usize, 0usize)];
        self.nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
        while let Some((start, end, depth, slot)) = stack.pop() {
            let idx = &mut rows[start..end];
            let count = idx.len();
            let sum: f64 = idx.iter().map(|&i| self.targets[i]).sum();
            let leaf = Node::Leaf {
                value: sum / count as f64,
                n_samples: count,
            };
            let first = self.targets[idx[0]];
            let pure = idx.iter().all(|&i| self.targets[i] == first);
            let depth_ok = self.max_depth.is_none_or(|m| depth < m);
            if pure || !depth_ok || count < 2 * self.min_leaf {
                self.nodes[slot] = leaf;
                continue;
            }
            let parent_score = sum * sum / count as f64;
            match self.best_split(idx) {
                Some(best) if best.score > parent_score * (1.0 + 1e-12) + 1e-12 => {
                    let col = self.columns[best.feature];
                    let mid = partition(idx, |i| col[i] <= best.threshold);
                    let left = self.nodes.len();
                    self.nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
                    self.nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
                    self.nodes[slot] = Node::Split {
                        feature: best.feature,
                        threshold: best.threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((start + mid, end, depth + 1, left + 1));
                    stack.push((start, start + mid, depth + 1, left));
                }
                _ => self.nodes[slot] = leaf,
            }
        }
        RegressionTree { nodes: self.nodes }
    }

    /// Maximises `S_L²/n_L + S_R²/n_R`, which is equivalent to minimising
    /// the children's summed squared error.
    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let d = self.columns.len();
        let mut candidates = rand::seq::index::sample(&mut self.rng, d, self.mtry).into_vec();
        candidates.sort_unstable();
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        let mut best: Option<BestSplit> = None;

        for f in candidates {
            let col = self.columns[f];
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (col[i], self.targets[i])));
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for (pos, &(_, y)) in self.pairs[..n - self.min_leaf].iter().enumerate() {
                left_sum += y;
                let n_left = pos + 1;
                if n_left < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (self.pairs[pos].0, self.pairs[pos + 1].0);
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Stable-order-agnostic in-place partition; returns the size of the
/// `true` block.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for i in 0..idx.len() {
        if pred(idx[i]) {
            idx.swap(i, k);
            k += 1;
        }
    }
    k
}
