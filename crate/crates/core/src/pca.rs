//! Principal component analysis on standardized features.
//!
//! Columns are centered and scaled to unit sample variance, so the
//! decomposed matrix is the correlation matrix; `PcaMode::Covariance` skips
//! the scaling. Eigenpairs come from a cyclic Jacobi sweep.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::texture::FeatureRecord;

/// Off-diagonal Frobenius norm at which Jacobi iteration stops, relative to
/// `max(1, ‖A‖_F)`.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaMode {
    Correlation,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mode: PcaMode,
    pub variance_target: f64,
    pub feature_names: Vec<String>,
    /// Constant input columns left out of the decomposition.
    pub dropped: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Descending, non-negative.
    pub eigenvalues: Vec<f64>,
    /// `components[m][f]`: loading of feature `f` on component `m`.
    pub components: Vec<Vec<f64>>,
    pub retained: usize,
}

/// Eigenvalues (unsorted) and eigenvectors as columns of a row-major
/// `n × n` matrix, for a symmetric row-major `n × n` input.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_TOLERANCE * norm.max(1.0);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

pub fn fit_pca(table: &FeatureTable, variance_target: f64) -> Result<PcaModel> {
    fit_pca_with(table, variance_target, PcaMode::Correlation)
}

pub fn fit_pca_with(table: &FeatureTable, variance_target: f64, mode: PcaMode) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Param(format!(
            "variance target must be in (0, 1], got {variance_target}"
        )));
    }
    let n = table.len();
    if n < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 records, got {n}")));
    }
    if table.schema().len() < 2 {
        return Err(Error::Data(format!(
            "PCA needs at least 2 features, got {}",
            table.schema().len()
        )));
    }

    let mut feature_names = Vec::new();
    let mut dropped = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in table.schema().iter().enumerate() {
        let col = table.column(j);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("column {name:?} has non-finite values")));
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("PCA: dropping constant column {name:?}");
            dropped.push(name.clone());
            continue;
        }
        let scale = match mode {
            PcaMode::Correlation => sd,
            PcaMode::Covariance => 1.0,
        };
        columns.push(col.iter().map(|x| (x - mean) / scale).collect::<Vec<f64>>());
        feature_names.push(name.clone());
        means.push(mean);
        scales.push(scale);
    }
    let d = feature_names.len();
    if d == 0 {
        return Err(Error::Data("every PCA input column is constant".into()));
    }

    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let s = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n - 1) as f64;
            cov[i * d + j] = s;
            cov[j * d + i] = s;
        }
    }
    let (values, vectors) = jacobi_eigen(&cov, d);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| values[k].max(0.0)).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let mut row: Vec<f64> = (0..d).map(|f| vectors[f * d + k]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= norm);
            // sign: the largest-magnitude loading is non-negative
            let lead = row
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row
        })
        .collect();

    let retained = retained_count(&eigenvalues, variance_target);
    Ok(PcaModel {
        mode,
        variance_target,
        feature_names,
        dropped,
        means,
        scales,
        eigenvalues,
        components,
        retained,
    })
}

/// Smallest `m` whose leading eigenvalues reach `target` of the total.
pub fn retained_count(eigenvalues: &[f64], target: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return eigenvalues.len().min(1);
    }
    let mut cum = 0.0;
    for (m, l) in eigenvalues.iter().enumerate() {
        cum += l;
        if cum / total >= target - 1e-12 {
            return m + 1;
        }
    }
    eigenvalues.len()
}

impl PcaModel {
    /// Fraction of total variance in each component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    pub fn standardize(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        self.feature_names
            .iter()
            .enumerate()
            .map(|(f, name)| Ok((rec.get(name)? - self.means[f]) / self.scales[f]))
            .collect()
    }

    /// Scores on the retained components.
    pub fn transform(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        let z = self.standardize(rec)?;
        Ok(self.project(&z, self.retained))
    }

    /// Scores on every component.
    pub fn transform_full(&self, rec: &FeatureRecord) -> Result<Vec<f64>> {
        let z = self.standardize(rec)?;
        Ok(self.project(&z, self.components.len()))
    }

    fn project(&self, z: &[f64], m: usize) -> Vec<f64> {
        self.components[..m]
            .iter()
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Standardized feature vector whose leading scores are `scores`.
    pub fn inverse_transform(&self, scores: &[f64]) -> Vec<f64> {
        let d = self.feature_names.len();
        let mut z = vec![0.0; d];
        for (row, s) in self.components.iter().zip(scores) {
            for (zf, l) in z.iter_mut().zip(row) {
                *zf += s * l;
            }
        }
        z
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Renders a coefficient/name term: leading terms carry only a minus sign,
/// later terms always carry their sign.
fn render_term(coef: f64, name: &str, first: bool) -> String {
    let mag = format!("{:.3}", coef.abs());
    let sign = if coef < 0.0 && mag.trim_start_matches(['0', '.']).is_empty() {
        // rounds to zero
        if first {
            ""
        } else {
            "+"
        }
    } else if coef < 0.0 {
        "-"
    } else if first {
        ""
    } else {
        "+"
    };
    format!("{sign}{mag}{name}")
}

/// One line per retained component:
/// `<1 - cumulative variance ratio, 4 decimals> <index> <terms>` where terms
/// are the `max_terms` largest-magnitude loadings, e.g.
/// `0.0808 1 -0.345energy-0.342lbp_energy+0.340dissimilarity`.
pub fn ranked_report(model: &PcaModel, max_terms: usize) -> Vec<String> {
    let ratios = model.explained_ratio();
    let mut cum = 0.0;
    let mut lines = Vec::with_capacity(model.retained);
    for (m, row) in model.components.iter().take(model.retained).enumerate() {
        cum += ratios[m];
        let ranked = (1.0 - cum).max(0.0);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
        let terms: String = idx
            .iter()
            .take(max_terms)
            .enumerate()
            .map(|(k, &f)| render_term(row[f], &model.feature_names[f], k == 0))
            .collect();
        lines.push(format!("{ranked:.4} {} {terms}", m + 1));
    }
    lines
}

/// Copy of `table` with a 0/1 column `Malware_class=<label>` appended per
/// label of the active label mode.
pub fn with_class_indicators(table: &FeatureTable) -> Result<FeatureTable> {
    let labels = table.label_set();
    let mut schema = table.schema().to_vec();
    schema.extend(labels.iter().map(|l| format!("Malware_class={l}")));
    let records = table
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            let own = table.label(i);
            for l in &labels {
                r.values
                    .insert(format!("Malware_class={l}"), if l == own { 1.0 } else { 0.0 });
            }
            r
        })
        .collect();
    FeatureTable::new(schema, records, table.label_mode())
}
