//! Run configuration, stored as TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binimg::ImageFormat;
use crate::dataset::{LabelMode, NormScope};
use crate::error::{Error, Result};
use crate::learn::{Hyperparameters, ModelKind};
use crate::pca::PcaMode;
use crate::texture::ExtractionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub normalization: NormalizationSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub eda: EdaSection,
    #[serde(default)]
    pub pca: PcaSection,
    #[serde(default)]
    pub models: ModelsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Artifacts go to `<output_dir>/seed-<seed>/`.
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub root: PathBuf,
    pub class_map: PathBuf,
    /// One feature CSV and one set of models per mode.
    #[serde(default = "default_label_modes")]
    pub label_modes: Vec<LabelMode>,
    #[serde(default = "default_true")]
    pub write_images: bool,
    #[serde(default = "default_image_format", with = "image_format_serde")]
    pub image_format: ImageFormat,
}

fn default_label_modes() -> Vec<LabelMode> {
    vec![LabelMode::Main, LabelMode::Sub]
}

fn default_true() -> bool {
    true
}

fn default_image_format() -> ImageFormat {
    ImageFormat::Pgm
}

mod image_format_serde {
    use super::ImageFormat;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &ImageFormat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(f.extension())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ImageFormat, D::Error> {
        match String::deserialize(d)?.as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            other => Err(serde::de::Error::custom(format!(
                "image format must be \"pgm\" or \"png\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationSection {
    pub scope: NormScope,
}

impl Default for NormalizationSection {
    fn default() -> Self {
        Self {
            scope: NormScope::Whole,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub test_fraction: f64,
    pub k: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            k: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdaSection {
    /// `(x, y)` feature pairs to plot.
    pub pairs: Vec<(String, String)>,
}

impl Default for EdaSection {
    fn default() -> Self {
        Self {
            pairs: default_eda_pairs(),
        }
    }
}

pub fn default_eda_pairs() -> Vec<(String, String)> {
    vec![
        ("gabor_entropy".into(), "lbp_energy".into()),
        ("gabor_entropy".into(), "correlation".into()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaSection {
    pub variance_target: f64,
    pub max_terms: usize,
    pub include_class_indicators: bool,
    pub mode: PcaMode,
}

impl Default for PcaSection {
    fn default() -> Self {
        Self {
            variance_target: 0.95,
            max_terms: 5,
            include_class_indicators: false,
            mode: PcaMode::Correlation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub kinds: Vec<ModelKind>,
    pub hyperparameters: Hyperparameters,
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            hyperparameters: Hyperparameters::default(),
        }
    }
}

impl RunConfig {
    /// Defaults everywhere except the mandatory fields.
    pub fn new(seed: u64, output_dir: PathBuf, corpus_root: PathBuf, class_map: PathBuf) -> Self {
        Self {
            run: RunSection { seed, output_dir },
            corpus: CorpusSection {
                root: corpus_root,
                class_map,
                label_modes: default_label_modes(),
                write_images: true,
                image_format: ImageFormat::Pgm,
            },
            extraction: ExtractionConfig::default(),
            normalization: NormalizationSection::default(),
            evaluation: EvaluationSection::default(),
            eda: EdaSection::default(),
            pca: PcaSection::default(),
            models: ModelsSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("run config", e.to_string()))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Relative corpus and class-map paths are resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.corpus.root, &mut self.corpus.class_map] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.run.output_dir.is_relative() {
            self.run.output_dir = base.join(&self.run.output_dir);
        }
    }

    /// `<output_dir>/seed-<seed>`
    pub fn run_dir(&self) -> PathBuf {
        self.run.output_dir.join(format!("seed-{}", self.run.seed))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.corpus.root.is_dir() {
            return Err(Error::Param(format!(
                "corpus root {} is not a directory",
                self.corpus.root.display()
            )));
        }
        if !self.corpus.class_map.is_file() {
            return Err(Error::Param(format!(
                "class map {} does not exist",
                self.corpus.class_map.display()
            )));
        }
        if self.corpus.label_modes.is_empty() {
            return Err(Error::Param("at least one label mode is required".into()));
        }
        let ev = &self.evaluation;
        if !(ev.test_fraction > 0.0 && ev.test_fraction < 1.0) {
            return Err(Error::Param(format!(
                "test fraction must be in (0, 1), got {}",
                ev.test_fraction
            )));
        }
        if ev.k < 2 {
            return Err(Error::Param(format!("k must be at least 2, got {}", ev.k)));
        }
        if !(self.pca.variance_target > 0.0 && self.pca.variance_target <= 1.0) {
            return Err(Error::Param("PCA variance target must be in (0, 1]".into()));
        }
        self.extraction.glcm.validate()?;
        crate::texture::build_gabor_bank(&self.extraction.gabor)?;
        Ok(())
    }
}
