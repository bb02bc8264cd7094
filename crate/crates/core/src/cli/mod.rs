//! Command-line front end.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::*;
pub use config::*;

use crate::binimg::ImageFormat;
use crate::dataset::{self, LabelMode, NormScope};
use crate::error::Result;
use crate::learn::{Hyperparameters, ModelKind};
use crate::pca::PcaMode;

#[derive(Debug, Parser)]
#[command(name = "malvis", version, about = "Texture-based malware family classification")]
pub struct Cli {
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Pgm,
    Png,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Pgm => ImageFormat::Pgm,
            FormatArg::Png => ImageFormat::Png,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Main,
    Sub,
}

impl From<LabelArg> for LabelMode {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Main => LabelMode::Main,
            LabelArg::Sub => LabelMode::Sub,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    NaiveBayes,
    Logistic,
    Forest,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::NaiveBayes => ModelKind::NaiveBayes,
            KindArg::Logistic => ModelKind::Logistic,
            KindArg::Forest => ModelKind::Forest,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Whole,
    TrainOnly,
}

impl From<ScopeArg> for NormScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Whole => NormScope::Whole,
            ScopeArg::TrainOnly => NormScope::TrainOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a binary, a directory of binaries or a corpus to grayscale images.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "pgm")]
        format: FormatArg,
    },
    /// Extract texture features from a corpus into per-label-mode CSVs.
    Extract {
        #[arg(long)]
        config: PathBuf,
        /// Also write the intermediate images.
        #[arg(long)]
        images: bool,
    },
    /// Scatter plots of feature pairs.
    Eda {
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "y")]
        x: Option<String>,
        #[arg(long, requires = "x")]
        y: Option<String>,
        /// Additional pair as `x,y`; repeatable. Without any pair the
        /// standard pairs are plotted.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(String, String)>,
        #[arg(long, value_enum, default_value = "main")]
        labels: LabelArg,
    },
    /// Principal component analysis with a ranked attribute report.
    Pca {
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        variance_target: f64,
        #[arg(long, default_value_t = 5)]
        max_terms: usize,
        /// Add one-hot `Malware_class=<label>` columns before fitting.
        #[arg(long)]
        include_class_indicators: bool,
        #[arg(long)]
        covariance: bool,
        #[arg(long, value_enum, default_value = "main")]
        labels: LabelArg,
    },
    /// Train on a stratified split and evaluate on the held-out part.
    Train {
        features: PathBuf,
        #[arg(long, value_enum)]
        model: KindArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "main")]
        labels: LabelArg,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, value_enum, default_value = "whole")]
        normalization: ScopeArg,
        /// TOML file with a hyperparameters table.
        #[arg(long)]
        hyperparameters: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation.
    Validate {
        features: PathBuf,
        #[arg(long, value_enum)]
        model: KindArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_enum, default_value = "main")]
        labels: LabelArg,
        #[arg(long, value_enum, default_value = "whole")]
        normalization: ScopeArg,
        #[arg(long)]
        hyperparameters: Option<PathBuf>,
    },
    /// Run every stage from a run configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a run configuration with every default filled in.
    ExampleConfig {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once(',') {
        Some((x, y)) if !x.is_empty() && !y.is_empty() => Ok((x.to_string(), y.to_string())),
        _ => Err(format!("expected `x,y`, got {s:?}")),
    }
}

fn load_hyper(path: &Option<PathBuf>) -> Result<Hyperparameters> {
    match path {
        None => Ok(Hyperparameters::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| crate::Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| crate::Error::parse("hyperparameters", e.to_string()))
        }
    }
}

fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    let base = path.parent().unwrap_or(std::path::Path::new("."));
    config.resolve_paths(base);
    Ok(config)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Convert { input, out, format } => {
            let summary = convert(&input, &out, format.into())?;
            println!(
                "converted {} file(s), {} failure(s)",
                summary.written.len(),
                summary.failures.len()
            );
            Ok(if summary.failures.is_empty() { 0 } else { 1 })
        }
        Command::Extract { config, images } => {
            let config = load_config(&config)?;
            config.validate()?;
            let run_dir = config.run_dir();
            for (mode, path) in extract(&config, &run_dir, images)? {
                println!("{}: {}", mode.name(), path.display());
            }
            Ok(0)
        }
        Command::Eda {
            features,
            out,
            x,
            y,
            mut pairs,
            labels,
        } => {
            let table = dataset::read_csv(&features, labels.into())?;
            if let (Some(x), Some(y)) = (x, y) {
                pairs.insert(0, (x, y));
            }
            let pairs = if pairs.is_empty() {
                default_eda_pairs()
            } else {
                pairs
            };
            for p in eda(&table, &pairs, &out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Pca {
            features,
            out,
            variance_target,
            max_terms,
            include_class_indicators,
            covariance,
            labels,
        } => {
            let table = dataset::read_csv(&features, labels.into())?;
            let section = PcaSection {
                variance_target,
                max_terms,
                include_class_indicators,
                mode: if covariance {
                    PcaMode::Covariance
                } else {
                    PcaMode::Correlation
                },
            };
            let model = pca(&table, &section, &out)?;
            println!(
                "retained {} of {} components",
                model.retained,
                model.eigenvalues.len()
            );
            for line in crate::pca::ranked_report(&model, max_terms) {
                println!("{line}");
            }
            Ok(0)
        }
        Command::Train {
            features,
            model,
            out,
            seed,
            labels,
            test_fraction,
            normalization,
            hyperparameters,
        } => {
            let table = dataset::read_csv(&features, labels.into())?;
            let hyper = load_hyper(&hyperparameters)?;
            let settings = TrainSettings {
                kind: model.into(),
                hyper: &hyper,
                seed,
                test_fraction,
                scope: normalization.into(),
            };
            let report = train(&table, settings, &out)?;
            print!("{}", report.to_text());
            Ok(0)
        }
        Command::Validate {
            features,
            model,
            out,
            seed,
            k,
            labels,
            normalization,
            hyperparameters,
        } => {
            let table = dataset::read_csv(&features, labels.into())?;
            let hyper = load_hyper(&hyperparameters)?;
            let report = cross_validate(&table, model.into(), &hyper, k, seed, normalization.into())?;
            write_cv_outputs(&report, &out.join("reports"))?;
            print!("{}", report.to_text());
            Ok(0)
        }
        Command::Pipeline { config } => {
            let config = load_config(&config)?;
            let summary = pipeline(&config)?;
            for r in &summary.tests {
                println!(
                    "{} {}: test accuracy {:.4}",
                    r.label_mode.name(),
                    r.kind,
                    r.metrics.accuracy
                );
            }
            println!("artifacts in {}", summary.run_dir.display());
            Ok(0)
        }
        Command::ExampleConfig { seed } => {
            let config = RunConfig::new(
                seed,
                "runs".into(),
                "corpus".into(),
                "class_map.tsv".into(),
            );
            print!("{}", config.render());
            Ok(0)
        }
    }
}
