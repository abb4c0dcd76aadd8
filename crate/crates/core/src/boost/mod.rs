//! Gradient-boosted regression trees on the logistic loss.
//!
//! Each round fits one depth-limited tree to the per-row gradients and
//! hessians with an exact greedy split search, grown level by level over
//! presorted feature columns.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::tabular::{Dataset, FoldSplit};

/// Label used for the booster in reports.
pub const CLASSIFIER_LABEL: &str = "GBT (stand-in)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub l2_regularization: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            l2_regularization: 1.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.min_child_weight >= 0.0) || !(self.l2_regularization >= 0.0) {
            return Err(Error::Config(
                "min_child_weight and l2_regularization must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Field-by-field order in declaration order; used to break ties.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        self.n_estimators
            .cmp(&other.n_estimators)
            .then(self.max_depth.cmp(&other.max_depth))
            .then(self.learning_rate.total_cmp(&other.learning_rate))
            .then(self.min_child_weight.total_cmp(&other.min_child_weight))
            .then(self.l2_regularization.total_cmp(&other.l2_regularization))
            .then(self.seed.cmp(&other.seed))
    }
}

/// max_depth {2,3,4,6} × n_estimators {50,100,200} × learning_rate {0.1,0.3}.
pub fn default_grid() -> Vec<BoostConfig> {
    let mut grid = Vec::new();
    for max_depth in [2, 3, 4, 6] {
        for n_estimators in [50, 100, 200] {
            for learning_rate in [0.1, 0.3] {
                grid.push(BoostConfig {
                    n_estimators,
                    max_depth,
                    learning_rate,
                    ..BoostConfig::default()
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", rename_all = "snake_case")]
pub enum Node<T> {
    /// Rows with `x[column] < threshold` go left.
    Split {
        column: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    pub fn predict(&self, row: &[T]) -> T {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => i = if row[column] < threshold { left } else { right },
                Node::Leaf { weight } => return weight,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoostModel<T> {
    pub width: usize,
    pub base_score: T,
    pub trees: Vec<Tree<T>>,
}

fn sigmoid<T: Real>(z: T) -> T {
    let p = T::one() / (T::one() + (-z).exp());
    p.max(T::epsilon()).min(T::one() - T::epsilon())
}

impl<T: Real> BoostModel<T> {
    /// A model with no trees.
    pub fn constant(width: usize, base_score: T) -> Self {
        Self {
            width,
            base_score,
            trees: Vec::new(),
        }
    }

    pub fn logits(&self, rows: &Matrix<T>) -> Result<Vec<T>> {
        if rows.cols() != self.width {
            return Err(Error::Shape(format!(
                "model expects {} columns, got {}",
                self.width,
                rows.cols()
            )));
        }
        Ok(rows
            .iter_rows()
            .map(|r| {
                self.trees
                    .iter()
                    .fold(self.base_score, |acc, t| acc + t.predict(r))
            })
            .collect())
    }

    /// Positive-class probabilities, strictly inside (0, 1).
    pub fn predict_proba(&self, rows: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self.logits(rows)?.into_iter().map(sigmoid).collect())
    }

    /// Class predictions at threshold 0.5.
    pub fn predict(&self, rows: &Matrix<T>) -> Result<Vec<u8>> {
        Ok(self
            .logits(rows)?
            .into_iter()
            .map(|z| u8::from(z >= T::zero()))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("serializing booster", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::json("parsing booster", e))?;
        for t in &m.trees {
            for n in &t.nodes {
                match *n {
                    Node::Split {
                        column,
                        left,
                        right,
                        ..
                    } if column >= m.width || left >= t.nodes.len() || right >= t.nodes.len() => {
                        return Err(Error::Schema(
                            "booster split refers outside the model".into(),
                        ))
                    }
                    Node::Leaf { weight } if !weight.is_finite() => {
                        return Err(Error::Schema("booster leaf weight is not finite".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(m)
    }
}

/// Mean logistic loss of logits `z` against `labels`.
pub fn logistic_loss<T: Real>(z: &[T], labels: &[u8]) -> f64 {
    let total: f64 = z
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let z = z.to_f64_lossy();
            // log(1 + e^z) - y z, computed stably
            z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(y) * z
        })
        .sum();
    total / z.len().max(1) as f64
}

struct Grower<'a, T> {
    x: &'a Matrix<T>,
    sorted: &'a [Vec<usize>],
    grad: Vec<f64>,
    hess: Vec<f64>,
    cfg: &'a BoostConfig,
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    gain: f64,
    column: usize,
    threshold: T,
}

impl<T: Real> Grower<'_, T> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.l2_regularization)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.l2_regularization)
    }

    fn grow(&self) -> Tree<T> {
        let n = self.x.rows();
        let mut nodes: Vec<Node<T>> = vec![Node::Leaf { weight: T::zero() }];
        // node currently holding each row; `usize::MAX` once the row reached a final leaf
        let mut node_of = vec![0usize; n];
        let mut active: Vec<usize> = vec![0];
        let mut totals = vec![(self.grad.iter().sum::<f64>(), self.hess.iter().sum::<f64>())];
        for depth in 0..=self.cfg.max_depth {
            if active.is_empty() {
                break;
            }
            // slot of each node id among the active nodes
            let mut slot = vec![usize::MAX; nodes.len()];
            for (s, &id) in active.iter().enumerate() {
                slot[id] = s;
            }
            let mut best: Vec<Option<Candidate<T>>> = vec![None; active.len()];
            if depth < self.cfg.max_depth {
                for (col, order) in self.sorted.iter().enumerate() {
                    let mut acc = vec![(0.0f64, 0.0f64); active.len()];
                    let mut last: Vec<Option<T>> = vec![None; active.len()];
                    for &r in order {
                        let id = node_of[r];
                        if id == usize::MAX || slot[id] == usize::MAX {
                            continue;
                        }
                        let s = slot[id];
                        let v = self.x[(r, col)];
                        if let Some(prev) = last[s] {
                            if v > prev {
                                let (gl, hl) = acc[s];
                                let (g, h) = totals[s];
                                let (gr, hr) = (g - gl, h - hl);
                                if hl >= self.cfg.min_child_weight
                                    && hr >= self.cfg.min_child_weight
                                {
                                    let gain = 0.5
                                        * (self.score(gl, hl) + self.score(gr, hr)
                                            - self.score(g, h));
                                    if gain > 1e-12 && best[s].map_or(true, |b| gain > b.gain) {
                                        let threshold = prev + (v - prev) / T::of(2.0);
                                        best[s] = Some(Candidate {
                                            gain,
                                            column: col,
                                            threshold,
                                        });
                                    }
                                }
                            }
                        }
                        acc[s].0 += self.grad[r];
                        acc[s].1 += self.hess[r];
                        last[s] = Some(v);
                    }
                }
            }
            let mut next_active = Vec::new();
            let mut next_totals = Vec::new();
            let mut children = vec![None; active.len()];
            for (s, &id) in active.iter().enumerate() {
                let (g, h) = totals[s];
                match best[s] {
                    Some(c) => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf { weight: T::zero() });
                        nodes.push(Node::Leaf { weight: T::zero() });
                        nodes[id] = Node::Split {
                            column: c.column,
                            threshold: c.threshold,
                            left,
                            right: left + 1,
                        };
                        children[s] = Some((c, left));
                        next_active.extend([left, left + 1]);
                    }
                    None => {
                        let w = self.leaf_value(g, h) * self.cfg.learning_rate;
                        nodes[id] = Node::Leaf { weight: T::of(w) };
                    }
                }
            }
            let mut sums = vec![(0.0, 0.0); nodes.len()];
            for r in 0..n {
                let id = node_of[r];
                if id == usize::MAX || slot[id] == usize::MAX {
                    continue;
                }
                node_of[r] = match children[slot[id]] {
                    Some((c, left)) => {
                        let child = if self.x[(r, c.column)] < c.threshold {
                            left
                        } else {
                            left + 1
                        };
                        sums[child].0 += self.grad[r];
                        sums[child].1 += self.hess[r];
                        child
                    }
                    None => usize::MAX,
                };
            }
            for &id in &next_active {
                next_totals.push(sums[id]);
            }
            active = next_active;
            totals = next_totals;
        }
        Tree { nodes }
    }
}

/// Fits a booster; identical inputs give identical models.
pub fn fit<T: Real>(train: &Dataset<T>, config: &BoostConfig) -> Result<BoostModel<T>> {
    config.validate()?;
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::DegenerateLabels);
    }
    let x = &train.features;
    let y: Vec<f64> = train.labels.iter().map(|&l| f64::from(l)).collect();
    let base = (pos as f64 / neg as f64).ln();
    let sorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|c| {
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.sort_by(|&a, &b| {
                x[(a, c)]
                    .partial_cmp(&x[(b, c)])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let mut model = BoostModel::constant(x.cols(), T::of(base));
    let mut logits = vec![T::of(base); x.rows()];
    for _ in 0..config.n_estimators {
        let p: Vec<f64> = logits
            .iter()
            .map(|&z| 1.0 / (1.0 + (-z.to_f64_lossy()).exp()))
            .collect();
        let grad = p.iter().zip(&y).map(|(p, y)| p - y).collect();
        let hess = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
        let tree = Grower {
            x,
            sorted: &sorted,
            grad,
            hess,
            cfg: config,
        }
        .grow();
        for (z, r) in logits.iter_mut().zip(x.iter_rows()) {
            *z += tree.predict(r);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

/// F1 of the positive class; 0 when there are no true positives.
pub fn f1(predictions: &[u8], labels: &[u8]) -> f64 {
    assert_eq!(
        predictions.len(),
        labels.len(),
        "predictions and labels must have equal length"
    );
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

/// Train and test f1 of a model fit on `train`.
pub fn fit_and_score<T: Real>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    config: &BoostConfig,
) -> Result<(f64, f64)> {
    let model = fit(train, config)?;
    let tr = f1(&model.predict(&train.features)?, &train.labels);
    let te = f1(&model.predict(&test.features)?, &test.labels);
    Ok((tr, te))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub config: BoostConfig,
    pub mean_test_f1: f64,
    pub fold_test_f1: Vec<f64>,
}

/// Picks the config with the best mean test f1 over `folds`; ties go to the
/// lexicographically smallest config. Returns the winner and every score.
pub fn grid_search<T: Real>(
    data: &Dataset<T>,
    folds: &FoldSplit,
    grid: &[BoostConfig],
) -> Result<(BoostConfig, Vec<GridScore>)> {
    if grid.is_empty() {
        return Err(Error::Config("classifier grid is empty".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..folds.fold_count).map(move |f| (c, f)))
        .collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let train = data.subset(&folds.train_rows(f));
            let test = data.subset(&folds.test_rows(f));
            fit_and_score(&train, &test, &grid[c]).map(|s| s.1)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<GridScore> = grid
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let fold_test_f1 = results[c * folds.fold_count..(c + 1) * folds.fold_count].to_vec();
            let mean_test_f1 = fold_test_f1.iter().sum::<f64>() / fold_test_f1.len() as f64;
            GridScore {
                config: *cfg,
                mean_test_f1,
                fold_test_f1,
            }
        })
        .collect();
    let best = scores
        .iter()
        .max_by(|a, b| {
            a.mean_test_f1
                .total_cmp(&b.mean_test_f1)
                .then_with(|| b.config.lexicographic_cmp(&a.config))
        })
        .expect("grid is non-empty");
    Ok((best.config, scores))
}

#[cfg(test)]
mod tests;
