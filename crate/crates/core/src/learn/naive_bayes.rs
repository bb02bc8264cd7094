//! Gaussian naive Bayes with a MAP decision rule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Design, KindHyper, ModelParams, TrainedModel, TrainingConfig};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaiveBayesHyper {
    /// Variance floor as a fraction of `max(1, global feature variance)`.
    pub variance_floor: f64,
}

impl Default for NaiveBayesHyper {
    fn default() -> Self {
        Self {
            variance_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub priors: Vec<f64>,
    /// `[class][feature]`
    pub means: Vec<Vec<f64>>,
    /// `[class][feature]`, population variance plus the floor.
    pub variances: Vec<Vec<f64>>,
}

fn population_mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub fn train_naive_bayes(train: &FeatureTable, hyper: &NaiveBayesHyper) -> Result<TrainedModel> {
    let design = Design::from_table(train)?;
    let (k, d, n) = (design.n_classes(), design.n_features(), design.rows.len());
    if let Some(bad) = design.rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature value {bad}")));
    }
    let floors: Vec<f64> = (0..d)
        .map(|f| {
            let (_, var) = population_mean_var(design.rows.iter().map(|r| r[f]));
            hyper.variance_floor * var.max(1.0)
        })
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &t) in design.targets.iter().enumerate() {
        members[t].push(i);
    }
    let mut priors = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::Data(format!("class {} has no records", design.labels[c])));
        }
        priors.push(idx.len() as f64 / n as f64);
        let mut m = Vec::with_capacity(d);
        let mut v = Vec::with_capacity(d);
        for (f, floor) in floors.iter().enumerate() {
            let (mean, var) = population_mean_var(idx.iter().map(|&i| design.rows[i][f]));
            m.push(mean);
            v.push(var + floor);
        }
        means.push(m);
        variances.push(v);
    }
    Ok(TrainedModel {
        label_set: design.labels,
        feature_names: design.feature_names,
        params: ModelParams::NaiveBayes(NaiveBayesParams {
            priors,
            means,
            variances,
        }),
        normalization: None,
        training_config: TrainingConfig {
            seed: 0,
            hyperparameters: KindHyper::NaiveBayes(hyper.clone()),
        },
    })
}

impl NaiveBayesParams {
    /// Unnormalized log posterior per class.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(prior, (mean, var))| {
                let ll: f64 = x
                    .iter()
                    .zip(mean.iter().zip(var))
                    .map(|(xf, (m, v))| -0.5 * (2.0 * PI * v).ln() - (xf - m) * (xf - m) / (2.0 * v))
                    .sum();
                prior.ln() + ll
            })
            .collect()
    }

    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.log_joint(x);
        super::softmax_in_place(&mut s);
        s
    }
}
