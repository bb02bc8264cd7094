//! Confusion matrices, precision/recall, cross-validation and scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{kfold_indices, FeatureTable};
use crate::error::{Error, Result};
use crate::learn::TrainedModel;
use crate::rng;

/// `counts[actual][predicted]` over an ordered label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let k = labels.len();
        Self {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Element-wise sum; label sets must match.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::Data("confusion matrices have different labels".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// One-vs-rest `(tp, fp, fn, tn)` for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[c][c];
        let fp: u64 = (0..self.labels.len()).map(|a| self.counts[a][c]).sum::<u64>() - tp;
        let fn_: u64 = self.counts[c].iter().sum::<u64>() - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    /// CSV with the predicted labels across the top and actual labels down
    /// the first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for l in &self.labels {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion<S: AsRef<str>, T: AsRef<str>>(
    preds: &[S],
    truths: &[T],
    label_order: &[String],
) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} ground-truth labels",
            preds.len(),
            truths.len()
        )));
    }
    let index: BTreeMap<&str, usize> = label_order
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let mut cm = ConfusionMatrix::zeros(label_order.to_vec());
    for (p, t) in preds.iter().zip(truths) {
        let (p, t) = (lookup(p.as_ref())?, lookup(t.as_ref())?);
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
    /// Set when `tp + fp == 0`; precision is then reported as 0.
    pub precision_undefined: bool,
    /// Set when `tp + fn == 0`; recall is then reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub total: u64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
}

/// Precision `tp / (tp + fp)` and recall `tp / (tp + fn)` per class, their
/// macro and support-weighted means, and accuracy `trace / total`.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("confusion matrix is empty".into()));
    }
    let k = cm.labels.len();
    let mut per_class = BTreeMap::new();
    let (mut mp, mut mr, mut wp, mut wr) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..k {
        let (tp, fp, fn_, _) = cm.one_vs_rest(c);
        let support = tp + fn_;
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let m = ClassMetrics {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            support,
            precision_undefined: tp + fp == 0,
            recall_undefined: tp + fn_ == 0,
        };
        mp += m.precision;
        mr += m.recall;
        wp += m.precision * support as f64;
        wr += m.recall * support as f64;
        per_class.insert(cm.labels[c].clone(), m);
    }
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        total,
        per_class,
        macro_precision: mp / k as f64,
        macro_recall: mr / k as f64,
        weighted_precision: wp / total as f64,
        weighted_recall: wr / total as f64,
    })
}

impl MetricsReport {
    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let width = self
            .per_class
            .keys()
            .map(String::len)
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        writeln!(out, "{:<width$}  precision  recall  support", "class").unwrap();
        for (label, m) in &self.per_class {
            let flag = if m.precision_undefined || m.recall_undefined {
                "  (undefined)"
            } else {
                ""
            };
            writeln!(
                out,
                "{label:<width$}  {:>9.4}  {:>6.4}  {:>7}{flag}",
                m.precision, m.recall, m.support
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>6.4}  {:>7}",
            "macro avg", self.macro_precision, self.macro_recall, self.total
        )
        .unwrap();
        writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>6.4}  {:>7}",
            "weighted avg", self.weighted_precision, self.weighted_recall, self.total
        )
        .unwrap();
        writeln!(out, "accuracy {:.4} ({} records)", self.accuracy, self.total).unwrap();
        out
    }
}

/// Confusion matrix of `model` on `table` over the model's label set.
pub fn evaluate(model: &TrainedModel, table: &FeatureTable) -> Result<ConfusionMatrix> {
    let preds: Vec<String> = model
        .predict_table(table)?
        .into_iter()
        .map(|p| p.label)
        .collect();
    confusion(&preds, &table.labels(), &model.label_set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub confusion: ConfusionMatrix,
    pub aggregate: MetricsReport,
}

/// Seed handed to the trainer for fold `fold`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    use rand::RngCore;
    rng::stream(seed, rng::streams::FOLD_BASE + fold as u64).next_u64()
}

/// Stratified k-fold cross-validation. `trainer` receives the training part
/// and a per-fold seed; the aggregate report is computed from the summed
/// confusion matrices over the table's full label set.
pub fn cross_validate<F>(trainer: F, table: &FeatureTable, k: usize, seed: u64) -> Result<CrossValidation>
where
    F: Fn(&FeatureTable, u64) -> Result<TrainedModel>,
{
    let folds = kfold_indices(table, k, seed)?;
    let labels = table.label_set();
    let mut total = ConfusionMatrix::zeros(labels.clone());
    let mut results = Vec::with_capacity(k);
    for (f, val_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..table.len())
            .filter(|i| val_idx.binary_search(i).is_err())
            .collect();
        let train = table.subset(&train_idx);
        let val = table.subset(val_idx);
        let s = fold_seed(seed, f);
        let model = trainer(&train, s)?;
        let preds: Vec<String> = model
            .predict_table(&val)?
            .into_iter()
            .map(|p| p.label)
            .collect();
        let cm = confusion(&preds, &val.labels(), &labels)?;
        total.add(&cm)?;
        results.push(FoldResult {
            fold: f,
            seed: s,
            metrics: metrics(&cm)?,
            confusion: cm,
        });
    }
    Ok(CrossValidation {
        k,
        seed,
        folds: results,
        aggregate: metrics(&total)?,
        confusion: total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

pub fn scatter_data(table: &FeatureTable, x_feature: &str, y_feature: &str) -> Result<Vec<ScatterPoint>> {
    let xi = table.column_index(x_feature)?;
    let yi = table.column_index(y_feature)?;
    Ok((0..table.len())
        .map(|i| ScatterPoint {
            x: table.records()[i].values[xi],
            y: table.records()[i].values[yi],
            label: table.label(i).to_string(),
        })
        .collect())
}

pub fn scatter_csv(points: &[ScatterPoint], x_feature: &str, y_feature: &str) -> String {
    let mut out = format!("{x_feature},{y_feature},label\n");
    for p in points {
        writeln!(
            out,
            "{},{},{}",
            crate::dataset::format_sig9(p.x),
            crate::dataset::format_sig9(p.y),
            p.label
        )
        .unwrap();
    }
    out
}

/// Qualitative palette; labels beyond twelve reuse colors cyclically.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// 640×480 SVG scatter plot with axis titles and a label legend. Colors are
/// assigned to labels in sorted order.
pub fn render_scatter_svg(points: &[ScatterPoint], x_title: &str, y_title: &str) -> String {
    let labels: Vec<&str> = {
        let mut l: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    let color = |label: &str| PALETTE[labels.binary_search(&label).unwrap() % PALETTE.len()];
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(&mut points.iter().map(|p| p.x));
    let (y0, y1) = range(&mut points.iter().map(|p| p.y));
    // plot area
    let (left, right, top, bottom) = (60.0, 500.0, 20.0, 420.0);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_W} {SVG_H}" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    )
    .unwrap();
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="{anchor}">{}</text>"#,
            sx(v),
            bottom + 15.0,
            crate::dataset::format_sig9(v)
        )
        .unwrap();
    }
    for v in [y0, y1] {
        writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            sy(v) + 4.0,
            crate::dataset::format_sig9(v)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text class="x-title" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 40.0,
        xml_escape(x_title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text class="y-title" x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        xml_escape(y_title)
    )
    .unwrap();
    for p in points {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            sx(p.x),
            sy(p.y),
            color(&p.label)
        )
        .unwrap();
    }
    for (i, l) in labels.iter().enumerate() {
        let y = top + 10.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<circle cx="515" cy="{y}" r="4" fill="{}"/><text class="legend" x="525" y="{}">{}</text>"#,
            color(l),
            y + 4.0,
            xml_escape(l)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_scatter_svg(points: &[ScatterPoint], x_title: &str, y_title: &str, path: &Path) -> Result<()> {
    fs::write(path, render_scatter_svg(points, x_title, y_title)).map_err(|e| Error::io(path, e))
}
