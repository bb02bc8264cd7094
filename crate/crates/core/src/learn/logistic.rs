//! Multinomial (softmax) logistic regression trained by full-batch gradient
//! descent.

use serde::{Deserialize, Serialize};

use super::{Design, KindHyper, ModelParams, TrainedModel, TrainingConfig};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on non-bias weights.
    pub l2: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// `[class][feature]`, bias in the last column.
    pub weights: Vec<Vec<f64>>,
    pub final_loss: f64,
    /// Learning rate in effect after the last epoch.
    pub final_learning_rate: f64,
    /// Number of times a step increased the loss and the rate was halved.
    pub halvings: usize,
}

impl LogisticParams {
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = self.weights.iter().map(|w| logit(w, x)).collect();
        super::softmax_in_place(&mut logits);
        logits
    }
}

#[inline]
fn logit(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (bias excluded) and its gradient.
///
/// `weights` is row-major `n_classes × (d + 1)` with the bias last.
pub fn loss_and_gradient(
    weights: &[f64],
    n_classes: usize,
    rows: &[Vec<f64>],
    targets: &[usize],
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let stride = d + 1;
    let n = rows.len() as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut probs = vec![0.0; n_classes];
    for (x, &y) in rows.iter().zip(targets) {
        for (c, p) in probs.iter_mut().enumerate() {
            *p = logit(&weights[c * stride..(c + 1) * stride], x);
        }
        let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + probs.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - probs[y];
        for (c, p) in probs.iter_mut().enumerate() {
            *p = (*p - lse).exp();
            let delta = *p - if c == y { 1.0 } else { 0.0 };
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (gf, xf) in g[..d].iter_mut().zip(x) {
                *gf += delta * xf;
            }
            g[d] += delta;
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..n_classes {
        for f in 0..d {
            let w = weights[c * stride + f];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + f] += l2 * w;
        }
    }
    (loss, grad)
}

/// Trained model and the loss after every epoch (`epochs + 1` entries,
/// starting from the zero-weight loss).
pub fn train_logistic_traced(
    train: &FeatureTable,
    hyper: &LogisticHyper,
) -> Result<(TrainedModel, Vec<f64>)> {
    let design = Design::from_table(train)?;
    let k = design.n_classes();
    if k < 2 {
        return Err(Error::Data("logistic regression needs at least 2 classes".into()));
    }
    if let Some(bad) = design.rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature value {bad}")));
    }
    if !(hyper.learning_rate > 0.0 && hyper.l2 >= 0.0) {
        return Err(Error::Param("learning rate must be positive and l2 non-negative".into()));
    }
    let stride = design.n_features() + 1;
    let mut w = vec![0.0; k * stride];
    let mut lr = hyper.learning_rate;
    let mut halvings = 0;
    let (mut loss, mut grad) = loss_and_gradient(&w, k, &design.rows, &design.targets, hyper.l2);
    let mut history = Vec::with_capacity(hyper.epochs + 1);
    history.push(loss);
    let mut candidate = vec![0.0; w.len()];
    for epoch in 0..hyper.epochs {
        loop {
            for ((c, wi), gi) in candidate.iter_mut().zip(&w).zip(&grad) {
                *c = wi - lr * gi;
            }
            let (new_loss, new_grad) =
                loss_and_gradient(&candidate, k, &design.rows, &design.targets, hyper.l2);
            if new_loss <= loss {
                std::mem::swap(&mut w, &mut candidate);
                loss = new_loss;
                grad = new_grad;
                break;
            }
            lr *= 0.5;
            halvings += 1;
            log::debug!("logistic: loss rose at epoch {epoch}, learning rate halved to {lr}");
            if lr < 1e-12 {
                // no descent direction left at machine precision
                break;
            }
        }
        history.push(loss);
    }
    if halvings > 0 {
        log::info!("logistic: learning rate halved {halvings} time(s), final rate {lr}");
    }
    let weights = w.chunks(stride).map(<[f64]>::to_vec).collect();
    let model = TrainedModel {
        label_set: design.labels,
        feature_names: design.feature_names,
        params: ModelParams::Logistic(LogisticParams {
            weights,
            final_loss: loss,
            final_learning_rate: lr,
            halvings,
        }),
        normalization: None,
        training_config: TrainingConfig {
            seed: 0,
            hyperparameters: KindHyper::Logistic(hyper.clone()),
        },
    };
    Ok((model, history))
}

pub fn train_logistic(train: &FeatureTable, hyper: &LogisticHyper) -> Result<TrainedModel> {
    train_logistic_traced(train, hyper).map(|(m, _)| m)
}
