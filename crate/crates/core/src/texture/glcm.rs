//! Gray-level co-occurrence matrices and their Haralick-style statistics.

use serde::{Deserialize, Serialize};

use super::entropy_bits;
use crate::binimg::GrayImage;
use crate::error::{Error, Result};

/// Image whose values lie in `[0, levels)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    values: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, values: Vec<u8>) -> Result<Self> {
        check_levels(levels)?;
        if values.len() != width * height {
            return Err(Error::Param(format!(
                "{} values do not fill a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|&&v| v as usize >= levels) {
            return Err(Error::Param(format!("value {v} outside [0, {levels})")));
        }
        Ok(Self {
            width,
            height,
            levels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }
}

fn check_levels(levels: usize) -> Result<()> {
    if !(2..=256).contains(&levels) {
        return Err(Error::Param(format!("levels must be in [2, 256], got {levels}")));
    }
    Ok(())
}

/// Maps pixel `p` to `floor(p * levels / 256)`.
pub fn quantize(img: &GrayImage, levels: usize) -> Result<QuantizedImage> {
    check_levels(levels)?;
    let values = img
        .pixels()
        .iter()
        .map(|&p| ((p as usize * levels) / 256) as u8)
        .collect();
    QuantizedImage::new(img.width(), img.height(), levels, values)
}

/// Normalized co-occurrence probabilities, `levels × levels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    probs: Vec<f64>,
}

impl Glcm {
    /// Builds a GLCM from explicit probabilities. They must be non-negative
    /// and sum to 1.
    pub fn from_probs(levels: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != levels * levels {
            return Err(Error::Param(format!(
                "expected {} entries for {levels} levels, got {}",
                levels * levels,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Param("GLCM entries must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!("GLCM sums to {total}, expected 1")));
        }
        Ok(Self { levels, probs })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }
}

/// Counts `(value(p), value(p + offset))` over every in-bounds position for
/// every offset, plus the transposed pair when `symmetric`, and normalizes.
pub fn compute_glcm(
    img: &QuantizedImage,
    offsets: &[(isize, isize)],
    symmetric: bool,
) -> Result<Glcm> {
    let levels = img.levels;
    let mut counts = vec![0u64; levels * levels];
    let (h, w) = (img.height as isize, img.width as isize);
    for &(dr, dc) in offsets {
        let rows = row_range(h, dr);
        let cols = row_range(w, dc);
        for r in rows {
            let base = (r * w) as usize;
            let nbase = ((r + dr) * w) as usize;
            for c in cols.clone() {
                let a = img.values[base + c as usize] as usize;
                let b = img.values[nbase + (c + dc) as usize] as usize;
                counts[a * levels + b] += 1;
                if symmetric {
                    counts[b * levels + a] += 1;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoPixelPairs);
    }
    let total = total as f64;
    Ok(Glcm {
        levels,
        probs: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// Positions `p` in `[0, n)` with `p + d` also in `[0, n)`.
fn row_range(n: isize, d: isize) -> std::ops::Range<isize> {
    let lo = (-d).max(0);
    let hi = (n - d).min(n);
    lo..hi.max(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlcmFeatures {
    pub energy: f64,
    pub entropy: f64,
    pub contrast: f64,
    pub dissimilarity: f64,
    pub homogeneity: f64,
    pub correlation: f64,
}

impl GlcmFeatures {
    pub const NAMES: [&'static str; 6] = [
        "energy",
        "entropy",
        "contrast",
        "dissimilarity",
        "homogeneity",
        "correlation",
    ];

    pub fn to_array(self) -> [f64; 6] {
        [
            self.energy,
            self.entropy,
            self.contrast,
            self.dissimilarity,
            self.homogeneity,
            self.correlation,
        ]
    }

    fn mean_of(items: &[GlcmFeatures]) -> GlcmFeatures {
        let n = items.len() as f64;
        let mut acc = [0.0; 6];
        for f in items {
            for (a, v) in acc.iter_mut().zip(f.to_array()) {
                *a += v;
            }
        }
        GlcmFeatures {
            energy: acc[0] / n,
            entropy: acc[1] / n,
            contrast: acc[2] / n,
            dissimilarity: acc[3] / n,
            homogeneity: acc[4] / n,
            correlation: acc[5] / n,
        }
    }
}

/// Energy (Σ P²), entropy in bits, contrast, dissimilarity, homogeneity and
/// correlation of a normalized GLCM. Correlation is 1 when either marginal
/// has zero variance.
pub fn glcm_features(g: &Glcm) -> GlcmFeatures {
    let l = g.levels;
    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    let mut mean_i = 0.0;
    let mut mean_j = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = g.get(i, j);
            if p == 0.0 {
                continue;
            }
            let d = i as f64 - j as f64;
            energy += p * p;
            contrast += d * d * p;
            dissimilarity += d.abs() * p;
            homogeneity += p / (1.0 + d * d);
            mean_i += i as f64 * p;
            mean_j += j as f64 * p;
        }
    }
    let mut var_i = 0.0;
    let mut var_j = 0.0;
    let mut cov = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = g.get(i, j);
            if p == 0.0 {
                continue;
            }
            let di = i as f64 - mean_i;
            let dj = j as f64 - mean_j;
            var_i += di * di * p;
            var_j += dj * dj * p;
            cov += di * dj * p;
        }
    }
    let denom = (var_i * var_j).sqrt();
    let correlation = if denom <= f64::EPSILON {
        1.0
    } else {
        (cov / denom).clamp(-1.0, 1.0)
    };
    GlcmFeatures {
        energy,
        entropy: entropy_bits(g.probs.iter().copied()),
        contrast,
        dissimilarity,
        homogeneity,
        correlation,
    }
}

/// GLCM extraction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlcmConfig {
    pub levels: usize,
    /// `(row, column)` displacements.
    pub offsets: Vec<(isize, isize)>,
    pub symmetric: bool,
    /// One GLCM per offset with features averaged, instead of one pooled GLCM.
    pub average_offsets: bool,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 32,
            offsets: vec![(0, 1)],
            symmetric: true,
            average_offsets: true,
        }
    }
}

impl GlcmConfig {
    /// 0°, 45°, 90° and 135° neighbors, features averaged over the four.
    pub fn four_angle() -> Self {
        Self {
            offsets: vec![(0, 1), (1, 1), (1, 0), (1, -1)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(self.levels)?;
        if self.offsets.is_empty() {
            return Err(Error::Param("at least one GLCM offset is required".into()));
        }
        if self.offsets.contains(&(0, 0)) {
            return Err(Error::Param("GLCM offset (0, 0) is not a neighbor".into()));
        }
        Ok(())
    }
}

/// Quantizes `img` and computes the six GLCM statistics under `cfg`.
pub fn image_glcm_features(img: &GrayImage, cfg: &GlcmConfig) -> Result<GlcmFeatures> {
    cfg.validate()?;
    let q = quantize(img, cfg.levels)?;
    if cfg.average_offsets && cfg.offsets.len() > 1 {
        // offsets with no in-bounds pairs are skipped, not fatal
        let per: Vec<GlcmFeatures> = cfg
            .offsets
            .iter()
            .filter_map(|&o| compute_glcm(&q, &[o], cfg.symmetric).ok())
            .map(|g| glcm_features(&g))
            .collect();
        if per.is_empty() {
            return Err(Error::NoPixelPairs);
        }
        Ok(GlcmFeatures::mean_of(&per))
    } else {
        Ok(glcm_features(&compute_glcm(&q, &cfg.offsets, cfg.symmetric)?))
    }
}
