//! Per-image texture features.

pub mod gabor;
pub mod glcm;
pub mod lbp;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use gabor::{build_gabor_bank, gabor_features, GaborBank, GaborFeatures, GaborParams};
pub use glcm::{compute_glcm, glcm_features, quantize, Glcm, GlcmConfig, GlcmFeatures};
pub use lbp::{lbp_features, LbpFeatures};

use crate::binimg::GrayImage;
use crate::error::{Error, Result};

/// The ten base features, in record order.
pub const BASE_FEATURES: [&str; 10] = [
    "energy",
    "entropy",
    "contrast",
    "dissimilarity",
    "homogeneity",
    "correlation",
    "lbp_energy",
    "lbp_entropy",
    "gabor_energy",
    "gabor_entropy",
];

/// `-Σ p log2 p`, skipping zero entries.
pub(crate) fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    let h: f64 = probs.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum();
    // a point mass gives -0.0
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// `ln(1 + |x|) · sign(x)`
    Log,
    Square,
    Cube,
}

impl Transform {
    pub const ALL: [Transform; 3] = [Transform::Log, Transform::Square, Transform::Cube];

    pub fn suffix(self) -> &'static str {
        match self {
            Transform::Log => "log",
            Transform::Square => "sq",
            Transform::Cube => "cube",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Log => (x.abs()).ln_1p().copysign(x),
            Transform::Square => x * x,
            Transform::Cube => x * x * x,
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Transform::Log),
            "square" | "sq" => Ok(Transform::Square),
            "cube" => Ok(Transform::Cube),
            other => Err(Error::Param(format!("unknown transform {other:?}"))),
        }
    }
}

/// Named feature values and labels for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub source_id: String,
    pub family: String,
    pub main_class: String,
    pub values: IndexMap<String, f64>,
}

impl FeatureRecord {
    pub fn unlabeled(source_id: impl Into<String>, values: IndexMap<String, f64>) -> Self {
        Self {
            source_id: source_id.into(),
            family: String::new(),
            main_class: String::new(),
            values,
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }
}

/// Everything that determines the extracted feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub glcm: GlcmConfig,
    pub gabor: GaborParams,
    /// Engineered columns appended after extraction.
    pub transforms: Vec<Transform>,
}

/// Extraction config paired with its prebuilt Gabor bank. Immutable and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct Extractor {
    config: ExtractionConfig,
    bank: GaborBank,
}

impl Extractor {
    pub fn new(config: ExtractionConfig) -> Result<Self> {
        config.glcm.validate()?;
        let bank = build_gabor_bank(&config.gabor)?;
        Ok(Self { config, bank })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    pub fn bank(&self) -> &GaborBank {
        &self.bank
    }

    /// Smallest side an image needs for every sub-extractor.
    pub fn min_side(&self) -> usize {
        self.bank.max_side().max(3)
    }

    /// The ten base features of `img`.
    pub fn extract(&self, img: &GrayImage) -> Result<IndexMap<String, f64>> {
        let g = glcm::image_glcm_features(img, &self.config.glcm)?;
        let l = lbp_features(img)?;
        let gb = gabor_features(img, &self.bank)?;
        let values = [
            g.energy,
            g.entropy,
            g.contrast,
            g.dissimilarity,
            g.homogeneity,
            g.correlation,
            l.lbp_energy,
            l.lbp_entropy,
            gb.gabor_energy,
            gb.gabor_entropy,
        ];
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite {}", BASE_FEATURES[i])));
        }
        Ok(BASE_FEATURES
            .iter()
            .map(|n| n.to_string())
            .zip(values)
            .collect())
    }

    /// Base features followed by the configured engineered columns.
    pub fn extract_record(&self, source_id: &str, img: &GrayImage) -> Result<FeatureRecord> {
        let rec = FeatureRecord::unlabeled(source_id, self.extract(img)?);
        Ok(engineer_features(&rec, &self.config.transforms))
    }
}

/// Builds a one-off [`Extractor`] and returns an unlabeled record of the ten
/// base features.
pub fn extract_features(img: &GrayImage, config: &ExtractionConfig) -> Result<FeatureRecord> {
    let ex = Extractor::new(config.clone())?;
    Ok(FeatureRecord::unlabeled("", ex.extract(img)?))
}

/// Column names produced by [`engineer_features`] for the given bases.
pub fn engineered_schema<S: AsRef<str>>(bases: &[S], transforms: &[Transform]) -> Vec<String> {
    let transforms = ordered_transforms(transforms);
    let mut out: Vec<String> = bases.iter().map(|b| b.as_ref().to_string()).collect();
    for b in bases {
        for t in &transforms {
            out.push(format!("{}_{}", b.as_ref(), t.suffix()));
        }
    }
    out
}

fn ordered_transforms(transforms: &[Transform]) -> Vec<Transform> {
    Transform::ALL
        .into_iter()
        .filter(|t| transforms.contains(t))
        .collect()
}

/// Appends `<base>_log`, `<base>_sq`, `<base>_cube` columns for every base
/// column of `rec`. Existing columns are left untouched.
pub fn engineer_features(rec: &FeatureRecord, transforms: &[Transform]) -> FeatureRecord {
    let transforms = ordered_transforms(transforms);
    let mut out = rec.clone();
    for (name, &x) in &rec.values {
        for t in &transforms {
            out.values.insert(format!("{name}_{}", t.suffix()), t.apply(x));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(values: &[(&str, f64)]) -> FeatureRecord {
        FeatureRecord::unlabeled(
            "r",
            values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        )
    }

    #[test]
    fn transform_edge_values() {
        for t in Transform::ALL {
            assert_eq!(t.apply(0.0), 0.0);
        }
        assert!((Transform::Log.apply(-1.0) + 2f64.ln()).abs() < 1e-15);
        assert_eq!(Transform::Square.apply(-1.0), 1.0);
        assert_eq!(Transform::Cube.apply(-1.0), -1.0);
    }

    #[test]
    fn engineered_column_order() {
        let r = rec(&[("a", 2.0), ("b", -0.5)]);
        let out = engineer_features(&r, &[Transform::Cube, Transform::Log]);
        let names: Vec<&str> = out.values.keys().map(String::as_str).collect();
        assert_eq!(names, ["a", "b", "a_log", "a_cube", "b_log", "b_cube"]);
        assert_eq!(out.values["a"], 2.0);
        assert_eq!(out.values["b_cube"], -0.125);
        assert_eq!(
            engineered_schema(&["a", "b"], &[Transform::Cube, Transform::Log]),
            names
        );
    }

    #[test]
    fn empty_transform_set_is_identity() {
        let r = rec(&[("a", 2.0)]);
        assert_eq!(engineer_features(&r, &[]), r);
    }

    #[test]
    fn constant_image_features() {
        let img = GrayImage::filled(64, 64, 93).unwrap();
        let r = extract_features(&img, &ExtractionConfig::default()).unwrap();
        let got: Vec<f64> = r.values.values().copied().collect();
        assert_eq!(got, [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.values.keys().collect::<Vec<_>>(), BASE_FEATURES);
    }

    #[test]
    fn transform_parsing() {
        assert_eq!("square".parse::<Transform>().unwrap(), Transform::Square);
        assert!("exp".parse::<Transform>().is_err());
    }
}
