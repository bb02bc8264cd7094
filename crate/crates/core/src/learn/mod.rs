//! From-scratch classifiers behind a single train/predict contract.

pub mod forest;
pub mod logistic;
pub mod naive_bayes;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestHyper, ForestParams};
pub use logistic::{train_logistic, LogisticHyper, LogisticParams};
pub use naive_bayes::{train_naive_bayes, NaiveBayesHyper, NaiveBayesParams};

use crate::dataset::{FeatureTable, NormParams};
use crate::error::{Error, Result};
use crate::texture::FeatureRecord;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    Logistic,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::NaiveBayes, ModelKind::Logistic, ModelKind::Forest];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownModelKind(s.to_string()))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for every kind; only the entry for the trained kind is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub naive_bayes: NaiveBayesHyper,
    pub logistic: LogisticHyper,
    pub forest: ForestHyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindHyper {
    NaiveBayes(NaiveBayesHyper),
    Logistic(LogisticHyper),
    Forest(ForestHyper),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub seed: u64,
    pub hyperparameters: KindHyper,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    NaiveBayes(NaiveBayesParams),
    Logistic(LogisticParams),
    Forest(ForestParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub label_set: Vec<String>,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
    pub training_config: TrainingConfig,
    /// Min-max ranges applied to raw records before scoring, if the model
    /// was trained on normalized features.
    pub normalization: Option<NormParams>,
}

/// Scores over `label_set`, in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub scores: Vec<f64>,
}

/// Numeric view of a table: rows in schema order, label indices into the
/// sorted label set.
#[derive(Debug, Clone)]
pub struct Design {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Design {
    pub fn from_table(table: &FeatureTable) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Data("training table is empty".into()));
        }
        let labels = table.label_set();
        let targets = table
            .labels()
            .iter()
            .map(|l| labels.binary_search_by(|x| x.as_str().cmp(l)).expect("label in set"))
            .collect();
        Ok(Self {
            rows: table.rows(),
            targets,
            labels,
            feature_names: table.schema().to_vec(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Index of the largest score; the earliest wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `logits` in place, shifted by the maximum.
pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

pub fn train(
    kind: ModelKind,
    table: &FeatureTable,
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel> {
    match kind {
        ModelKind::NaiveBayes => train_naive_bayes(table, &hyper.naive_bayes),
        ModelKind::Logistic => train_logistic(table, &hyper.logistic),
        ModelKind::Forest => train_forest(table, &hyper.forest, seed),
    }
}

/// Scales the raw `table` with `norm`, trains on the result and attaches
/// `norm` to the model so that [`TrainedModel::predict`] takes raw records.
pub fn train_normalized(
    kind: ModelKind,
    table: &FeatureTable,
    norm: &NormParams,
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel> {
    let scaled = norm.apply(table)?;
    let mut model = train(kind, &scaled, hyper, seed)?;
    model.normalization = Some(norm.clone());
    Ok(model)
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::Logistic(_) => ModelKind::Logistic,
            ModelParams::Forest(_) => ModelKind::Forest,
        }
    }

    /// Feature values of `rec` in model order, normalized if the model
    /// carries normalization ranges.
    pub fn features_of(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        let raw = self.feature_names.iter().map(|n| rec.get(n));
        match &self.normalization {
            Some(norm) => raw
                .zip(&norm.columns)
                .map(|(v, range)| v.map(|v| range.scale(v)))
                .collect(),
            None => raw.collect(),
        }
    }

    pub fn predict(&self, rec: &FeatureRecord) -> Result<Prediction> {
        let x = self.features_of(rec)?;
        Ok(self.predict_row(&x))
    }

    /// Prediction for a row already in model feature order and scale.
    pub fn predict_row(&self, x: &[f64]) -> Prediction {
        let scores = match &self.params {
            ModelParams::NaiveBayes(p) => p.posterior(x),
            ModelParams::Logistic(p) => p.probabilities(x),
            ModelParams::Forest(p) => p.vote_fractions(x, self.label_set.len()),
        };
        Prediction {
            label: self.label_set[argmax(&scores)].clone(),
            scores,
        }
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<Prediction>> {
        table.records().iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let parameters = match &self.params {
            ModelParams::NaiveBayes(p) => serde_json::to_value(p)?,
            ModelParams::Logistic(p) => serde_json::to_value(p)?,
            ModelParams::Forest(p) => serde_json::to_value(p)?,
        };
        let wire = Wire {
            format_version: FORMAT_VERSION,
            kind: self.kind().name().to_string(),
            label_set: self.label_set.clone(),
            feature_names: self.feature_names.clone(),
            parameters,
            training_config: self.training_config.clone(),
            normalization: self.normalization.clone(),
        };
        let mut s = serde_json::to_string_pretty(&wire)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: Wire = serde_json::from_str(text)?;
        if wire.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: wire.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let kind: ModelKind = wire.kind.parse()?;
        let params = match kind {
            ModelKind::NaiveBayes => ModelParams::NaiveBayes(serde_json::from_value(wire.parameters)?),
            ModelKind::Logistic => ModelParams::Logistic(serde_json::from_value(wire.parameters)?),
            ModelKind::Forest => ModelParams::Forest(serde_json::from_value(wire.parameters)?),
        };
        let model = TrainedModel {
            label_set: wire.label_set,
            feature_names: wire.feature_names,
            params,
            training_config: wire.training_config,
            normalization: wire.normalization,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.label_set.is_empty() {
            return Err(Error::Data("model has an empty label set".into()));
        }
        let mut sorted = self.label_set.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.label_set.len() {
            return Err(Error::Data("model label set has duplicates".into()));
        }
        let (k, d) = (self.label_set.len(), self.feature_names.len());
        let ok = match &self.params {
            ModelParams::NaiveBayes(p) => {
                p.priors.len() == k
                    && p.means.iter().chain(&p.variances).all(|r| r.len() == d)
                    && p.means.len() == k
                    && p.variances.len() == k
            }
            ModelParams::Logistic(p) => {
                p.weights.len() == k && p.weights.iter().all(|r| r.len() == d + 1)
            }
            ModelParams::Forest(p) => p.trees.iter().all(|t| t.is_consistent(k, d)),
        };
        let norm_ok = self
            .normalization
            .as_ref()
            .is_none_or(|n| n.columns.len() == d);
        if !ok || !norm_ok {
            return Err(Error::Data(
                "model parameters do not match its label set and features".into(),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::load(path)
}

#[derive(Serialize, Deserialize)]
struct Wire {
    format_version: u32,
    kind: String,
    label_set: Vec<String>,
    feature_names: Vec<String>,
    parameters: serde_json::Value,
    training_config: TrainingConfig,
    normalization: Option<NormParams>,
}
