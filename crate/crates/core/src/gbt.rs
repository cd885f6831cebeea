//! Gradient-boosted regression trees with second-order split gain.
//!
//! Squared-error objective: gradient `pred - y`, hessian `1`. Trees are grown
//! depth-first with exact greedy split search over every midpoint between
//! consecutive distinct feature values. A split of a node with gradient sum
//! `G` and hessian sum `H` into `(G_L, H_L)` / `(G_R, H_R)` has gain
//!
//! ```text
//! 0.5 * (G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda)) - gamma
//! ```
//!
//! and is taken only when that gain is positive and both children keep at
//! least `min_child_weight` hessian. Leaves hold `-G / (H + lambda)`; the
//! model output is `base_score + learning_rate * sum(leaf weights)`.
//!
//! Ties between candidate splits go to the lowest feature index, then the
//! lowest threshold, so training does not depend on the thread count.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics::{rmse_unchecked, shifted_mean};
use crate::rng::{self, Domain};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Work size (rows x features) above which split search runs in parallel.
const PARALLEL_SPLIT_WORK: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub min_child_weight: f64,
    pub gamma_split: f64,
    pub subsample: f64,
    pub rng_seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda_l2: 1.0,
            min_child_weight: 1.0,
            gamma_split: 0.0,
            subsample: 1.0,
            rng_seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.lambda_l2 >= 0.0) || !(self.min_child_weight >= 0.0) || !(self.gamma_split >= 0.0) {
            return bad("lambda_l2, min_child_weight and gamma_split must be nonnegative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: String,
        /// Index into the model's `feature_names`.
        feature_index: usize,
        /// Rows with `value <= threshold` go left.
        threshold: f64,
        gain: f64,
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    /// Leaf weight reached by a row; `cols[i]` is the row value of model feature `i`.
    #[inline]
    fn route(&self, row: &[f64], cols: &[usize]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[cols[*feature_index]] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(usize, &str, f64)) {
        if let TreeNode::Split {
            feature,
            feature_index,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature_index, feature, *gain);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_samples: usize,
    pub final_train_rmse: f64,
    /// Training RMSE after each tree.
    pub train_rmse_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub schema_version: u32,
    pub config: GbtConfig,
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub training_meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    grad: &'a [f64],
    names: &'a [String],
    cfg: &'a GbtConfig,
    go_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        let g = rows.iter().map(|&r| self.grad[r as usize]).sum();
        (g, rows.len() as f64)
    }

    fn leaf(&self, g: f64, h: f64) -> TreeNode {
        TreeNode::Leaf {
            weight: -g / (h + self.cfg.lambda_l2),
            cover: h,
        }
    }

    fn best_for_feature(&self, feature: usize, sorted: &[u32], g: f64, h: f64) -> Option<Candidate> {
        let lambda = self.cfg.lambda_l2;
        let parent = g * g / (h + lambda);
        let mut best: Option<Candidate> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for pair in sorted.windows(2) {
            let (a, b) = (pair[0] as usize, pair[1] as usize);
            gl += self.grad[a];
            hl += 1.0;
            let va = self.x.get(a, feature);
            let vb = self.x.get(b, feature);
            if vb <= va {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                continue;
            }
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - self.cfg.gamma_split;
            if best.is_none_or(|c| gain > c.gain) {
                let mut threshold = 0.5 * (va + vb);
                if threshold >= vb {
                    threshold = va;
                }
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
        best
    }

    fn best_split(&self, lists: &[Vec<u32>], g: f64, h: f64) -> Option<Candidate> {
        let work = lists.len() * lists[0].len();
        let per_feature: Vec<Option<Candidate>> = if work >= PARALLEL_SPLIT_WORK {
            lists
                .par_iter()
                .enumerate()
                .map(|(f, sorted)| self.best_for_feature(f, sorted, g, h))
                .collect()
        } else {
            lists
                .iter()
                .enumerate()
                .map(|(f, sorted)| self.best_for_feature(f, sorted, g, h))
                .collect()
        };
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if c.gain <= a.gain => Some(a),
                _ => Some(c),
            })
    }

    /// `lists[f]` holds this node's rows sorted by feature `f`.
    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let (g, h) = self.sums(&lists[0]);
        if depth >= self.cfg.max_depth || lists[0].len() < 2 {
            return self.leaf(g, h);
        }
        let best = match self.best_split(&lists, g, h) {
            Some(c) if c.gain > 0.0 => c,
            _ => return self.leaf(g, h),
        };
        for &r in &lists[best.feature] {
            self.go_left[r as usize] = self.x.get(r as usize, best.feature) <= best.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| self.go_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        TreeNode::Split {
            feature: self.names[best.feature].clone(),
            feature_index: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            cover: h,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Rows sorted by each feature (ties by row index).
fn presort(x: &FeatureMatrix, rows: &[u32]) -> Vec<Vec<u32>> {
    (0..x.cols())
        .map(|f| {
            let mut list = rows.to_vec();
            list.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
            list
        })
        .collect()
}

/// Fits one tree to the gradients of the given rows.
fn fit_tree(x: &FeatureMatrix, grad: &[f64], rows: &[u32], cfg: &GbtConfig) -> TreeNode {
    let mut builder = TreeBuilder {
        x,
        grad,
        names: x.names(),
        cfg,
        go_left: vec![false; x.rows()],
    };
    let lists = presort(x, rows);
    builder.grow(lists, 0)
}

pub fn train(features: &FeatureMatrix, targets: &[f64], cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    let n = features.rows();
    if n == 0 || features.cols() == 0 {
        return Err(Error::Shape("training needs at least one row and one feature".into()));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!("{n} feature rows vs {} targets", targets.len())));
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFinite(format!("target row {i}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::Shape("too many rows".into()));
    }

    let base_score = shifted_mean(targets);
    let mut pred = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let cols: Vec<usize> = (0..features.cols()).collect();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut history = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees {
        for i in 0..n {
            grad[i] = pred[i] - targets[i];
        }
        let rows = if cfg.subsample < 1.0 {
            let mut rng = rng::stream(cfg.rng_seed, Domain::Subsample, t as u64, 0);
            let picked: Vec<u32> = all_rows.iter().copied().filter(|_| rng.gen::<f64>() < cfg.subsample).collect();
            if picked.is_empty() {
                vec![rng.gen_range(0..n as u32)]
            } else {
                picked
            }
        } else {
            all_rows.clone()
        };
        let tree = fit_tree(features, &grad, &rows, cfg);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.route(features.row(i), &cols);
        }
        history.push(rmse_unchecked(&pred, targets));
        trees.push(tree);
    }
    Ok(GbtModel {
        schema_version: MODEL_SCHEMA_VERSION,
        config: *cfg,
        feature_names: features.names().to_vec(),
        base_score,
        trees,
        training_meta: TrainingMeta {
            n_samples: n,
            final_train_rmse: *history.last().expect("n_trees >= 1"),
            train_rmse_history: history,
        },
    })
}

impl GbtModel {
    /// Raw (unclamped) predictions using the first `n_trees` trees. Columns are
    /// matched by name.
    pub fn predict_with_trees(&self, features: &FeatureMatrix, n_trees: usize) -> Result<Vec<f64>> {
        let cols = features.resolve(&self.feature_names)?;
        let trees = &self.trees[..n_trees.min(self.trees.len())];
        Ok((0..features.rows())
            .map(|r| {
                let row = features.row(r);
                let mut p = self.base_score;
                for tree in trees {
                    p += self.config.learning_rate * tree.route(row, &cols);
                }
                p
            })
            .collect())
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_with_trees(features, self.trees.len())
    }

    /// Total split gain per feature, in `feature_names` order.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut totals = vec![0.0; self.feature_names.len()];
        for tree in &self.trees {
            tree.visit_splits(&mut |idx, _, gain| totals[idx] += gain);
        }
        self.feature_names.iter().cloned().zip(totals).collect()
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut bad = None;
        for tree in &self.trees {
            tree.visit_splits(&mut |idx, name, _| {
                if self.feature_names.get(idx).map(String::as_str) != Some(name) {
                    bad.get_or_insert_with(|| name.to_string());
                }
            });
        }
        match bad {
            Some(name) => Err(Error::MissingColumn(name)),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let model: GbtModel = serde_json::from_str(text).map_err(|e| Error::json(origin, e))?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
