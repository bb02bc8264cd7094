//! Random forest of CART trees split on Gini impurity.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, Design, KindHyper, ModelParams, TrainedModel, TrainingConfig};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestHyper {
    pub n_trees: usize,
    /// Candidate features per node; `floor(sqrt(d))` (at least 1) when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    /// Unlimited when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    /// Draw each tree's training set with replacement.
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<u32> },
}

/// Flat node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf<'a>(&'a self, x: &[f64]) -> &'a [u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the leaf reached by `x`; ties go to the lower index.
    pub fn vote(&self, x: &[f64]) -> usize {
        let counts: Vec<f64> = self.leaf(x).iter().map(|&c| c as f64).collect();
        argmax(&counts)
    }

    pub(crate) fn is_consistent(&self, n_classes: usize, n_features: usize) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().all(|n| match n {
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => *feature < n_features && *left < self.nodes.len() && *right < self.nodes.len(),
                Node::Leaf { counts } => counts.len() == n_classes,
            })
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
}

impl ForestParams {
    pub fn vote_fractions(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut votes = vec![0.0; n_classes];
        for t in &self.trees {
            votes[t.vote(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }
}

/// Gini impurity of a class-count vector with `total` members.
pub fn gini(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    design: &'a Design,
    max_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.design.n_classes()];
        for &s in samples {
            c[self.design.targets[s]] += 1;
        }
        c
    }

    /// Lowest weighted child Gini over midpoints of consecutive distinct
    /// values of `feature`; the first candidate wins ties.
    fn best_threshold(&self, samples: &[usize], feature: usize) -> Option<BestSplit> {
        let k = self.design.n_classes();
        let mut sorted: Vec<(f64, usize)> = samples
            .iter()
            .map(|&s| (self.design.rows[s][feature], self.design.targets[s]))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len() as u32;
        let mut right = vec![0u32; k];
        for &(_, y) in &sorted {
            right[y] += 1;
        }
        let mut left = vec![0u32; k];
        let mut best: Option<BestSplit> = None;
        for i in 0..sorted.len() - 1 {
            let (v, y) = sorted[i];
            left[y] += 1;
            right[y] -= 1;
            let next = sorted[i + 1].0;
            if next <= v {
                continue;
            }
            let nl = i as u32 + 1;
            let nr = n - nl;
            let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            if best.is_none_or(|b| impurity < b.impurity) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(BestSplit {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let counts = self.counts(&samples);
        let total = samples.len() as u32;
        let parent = gini(&counts, total);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure
            || samples.len() < self.min_samples_split
            || self.max_depth.is_some_and(|m| depth >= m)
        {
            return id;
        }

        let d = self.design.n_features();
        let mut features: Vec<usize> = (0..d).collect();
        // partial Fisher-Yates: the first max_features entries are the sample
        for i in 0..self.max_features {
            let j = rng.gen_range(i..d);
            features.swap(i, j);
        }
        let mut best: Option<BestSplit> = None;
        for &f in &features[..self.max_features] {
            if let Some(s) = self.best_threshold(&samples, f) {
                if best.is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        let Some(best) = best.filter(|b| b.impurity < parent - 1e-12) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.design.rows[s][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

/// One tree on the given samples, consuming `rng` for feature sampling.
fn build_tree(design: &Design, hyper: &ForestHyper, max_features: usize, samples: Vec<usize>, rng: &mut Rng) -> Tree {
    let mut b = Builder {
        design,
        max_features,
        min_samples_split: hyper.min_samples_split.max(2),
        max_depth: hyper.max_depth,
        nodes: Vec::new(),
    };
    b.grow(samples, 0, rng);
    Tree { nodes: b.nodes }
}

/// Trains `n_trees` trees in parallel; tree `i` draws from stream
/// `(seed, i)` only, so the result does not depend on scheduling.
pub fn train_forest(train: &FeatureTable, hyper: &ForestHyper, seed: u64) -> Result<TrainedModel> {
    let design = Design::from_table(train)?;
    if design.rows.len() < 2 {
        return Err(Error::Data("random forest needs at least 2 records".into()));
    }
    if hyper.n_trees == 0 {
        return Err(Error::Param("n_trees must be at least 1".into()));
    }
    if let Some(bad) = design.rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature value {bad}")));
    }
    let d = design.n_features();
    if d == 0 {
        return Err(Error::Data("random forest needs at least one feature".into()));
    }
    let max_features = hyper
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let n = design.rows.len();
    let trees: Vec<Tree> = (0..hyper.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, rng::streams::TREE_BASE + i as u64);
            let samples: Vec<usize> = if hyper.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(&design, hyper, max_features, samples, &mut rng)
        })
        .collect();
    Ok(TrainedModel {
        label_set: design.labels,
        feature_names: design.feature_names,
        params: ModelParams::Forest(ForestParams { trees }),
        normalization: None,
        training_config: TrainingConfig {
            seed,
            hyperparameters: KindHyper::Forest(hyper.clone()),
        },
    })
}
