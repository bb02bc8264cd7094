//! Pipeline stages behind the CLI verbs. Every stage writes only under the
//! directory it is given and is deterministic for a fixed configuration.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PcaSection, RunConfig};
use crate::binimg::{self, ImageFormat};
use crate::dataset::{
    self, stratified_split_indices, ClassMap, CorpusEntry, FeatureTable, LabelMode, NormParams,
    NormScope,
};
use crate::error::{Error, Result};
use crate::eval::{self, ConfusionMatrix, CrossValidation, MetricsReport};
use crate::learn::{self, Hyperparameters, ModelKind, TrainedModel};
use crate::pca;
use crate::texture::{Extractor, FeatureRecord};

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

#[derive(Debug, Default)]
pub struct ConvertSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, Error)>,
}

/// Files to convert under `input`, with their output path relative to the
/// output directory: a single file, the files of a directory, or the files
/// of its immediate subdirectories (a corpus).
fn conversion_jobs(input: &Path, format: ImageFormat) -> Result<Vec<(PathBuf, PathBuf)>> {
    let image_name = |p: &Path| {
        let mut name = p.file_name().unwrap_or_default().to_os_string();
        name.push(".");
        name.push(format.extension());
        PathBuf::from(name)
    };
    if input.is_file() {
        return Ok(vec![(input.to_path_buf(), image_name(input))]);
    }
    let mut jobs = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(input, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_file() {
            jobs.push((p.clone(), image_name(&p)));
        } else if p.is_dir() {
            let sub = PathBuf::from(p.file_name().unwrap_or_default());
            let mut files: Vec<PathBuf> = fs::read_dir(&p)
                .map_err(|e| Error::io(&p, e))?
                .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&p, err)))
                .collect::<Result<_>>()?;
            files.retain(|f| f.is_file());
            files.sort();
            jobs.extend(files.into_iter().map(|f| {
                let out = sub.join(image_name(&f));
                (f, out)
            }));
        }
    }
    Ok(jobs)
}

/// Converts every input file to an image named `<source>.<ext>`. Failures
/// are collected per file rather than aborting the batch.
pub fn convert(input: &Path, out_dir: &Path, format: ImageFormat) -> Result<ConvertSummary> {
    let jobs = conversion_jobs(input, format)?;
    create_dir(out_dir)?;
    let results: Vec<(PathBuf, Result<PathBuf>)> = jobs
        .par_iter()
        .map(|(src, rel)| {
            let dst = out_dir.join(rel);
            let r = (|| {
                let img = binimg::file_to_image(src)?;
                if let Some(parent) = dst.parent() {
                    create_dir(parent)?;
                }
                binimg::write_image(&img, &dst, format)?;
                Ok(dst.clone())
            })();
            (src.clone(), r)
        })
        .collect();
    let mut summary = ConvertSummary::default();
    for (src, r) in results {
        match r {
            Ok(p) => summary.written.push(p),
            Err(e) => {
                log::error!("{}: {e}", src.display());
                summary.failures.push((src, e));
            }
        }
    }
    Ok(summary)
}

/// Reads every corpus file once, optionally writes its image under
/// `images`, and extracts a labeled feature record.
pub fn process_corpus(
    entries: &[CorpusEntry],
    extractor: &Extractor,
    images: Option<(&Path, ImageFormat)>,
) -> Result<Vec<FeatureRecord>> {
    entries
        .par_iter()
        .map(|entry| {
            let with_context = |e: Error| Error::Data(format!("{}: {e}", entry.path.display()));
            let img = binimg::file_to_image(&entry.path).map_err(with_context)?;
            if let Some((dir, format)) = images {
                let dst = dir
                    .join(&entry.family)
                    .join(format!("{}.{}", file_name(&entry.path), format.extension()));
                binimg::write_image(&img, &dst, format).map_err(with_context)?;
            }
            let mut rec = extractor
                .extract_record(&entry.source_id, &img)
                .map_err(with_context)?;
            rec.family = entry.family.clone();
            rec.main_class = entry.main_class.clone();
            Ok(rec)
        })
        .collect()
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

/// Scans the corpus and writes `features/<mode>.csv` under `run_dir` for
/// every configured label mode. Returns the CSV paths.
pub fn extract(config: &RunConfig, run_dir: &Path, write_images: bool) -> Result<Vec<(LabelMode, PathBuf)>> {
    let class_map = ClassMap::load(&config.corpus.class_map)?;
    let entries = dataset::scan_corpus(&config.corpus.root, &class_map)?;
    let extractor = Extractor::new(config.extraction.clone())?;
    let image_dir = run_dir.join("images");
    if write_images {
        for family in entries.iter().map(|e| &e.family) {
            create_dir(&image_dir.join(family))?;
        }
    }
    let images = write_images.then_some((image_dir.as_path(), config.corpus.image_format));
    let records = process_corpus(&entries, &extractor, images)?;
    log::info!("extracted features from {} files", records.len());
    let mut out = Vec::new();
    for &mode in &config.corpus.label_modes {
        let table = FeatureTable::from_records(records.clone(), mode)?;
        let path = run_dir.join("features").join(format!("{}.csv", mode.name()));
        create_dir(path.parent().unwrap())?;
        dataset::write_csv(&table, &path)?;
        out.push((mode, path));
    }
    Ok(out)
}

/// Writes `<x>_vs_<y>.csv` and `.svg` into `out_dir` for every pair.
pub fn eda(table: &FeatureTable, pairs: &[(String, String)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    for (x, y) in pairs {
        let points = eval::scatter_data(table, x, y)?;
        let stem = format!("{x}_vs_{y}");
        let csv = out_dir.join(format!("{stem}.csv"));
        write_file(&csv, eval::scatter_csv(&points, x, y))?;
        let svg = out_dir.join(format!("{stem}.svg"));
        eval::emit_scatter_svg(&points, x, y, &svg)?;
        written.extend([csv, svg]);
    }
    Ok(written)
}

/// Fits PCA and writes `model.json` and `report.txt` into `out_dir`.
pub fn pca(table: &FeatureTable, section: &PcaSection, out_dir: &Path) -> Result<pca::PcaModel> {
    let input = if section.include_class_indicators {
        pca::with_class_indicators(table)?
    } else {
        table.clone()
    };
    let model = pca::fit_pca_with(&input, section.variance_target, section.mode)?;
    create_dir(out_dir)?;
    model.save(&out_dir.join("model.json"))?;
    let mut report = pca::ranked_report(&model, section.max_terms).join("\n");
    report.push('\n');
    write_file(&out_dir.join("report.txt"), report)?;
    Ok(model)
}

/// Normalization ranges for training on `train_idx` of `table`.
fn fit_norm(table: &FeatureTable, train: &FeatureTable, scope: NormScope) -> Result<NormParams> {
    match scope {
        NormScope::Whole => NormParams::fit(table, NormScope::Whole),
        NormScope::TrainOnly => NormParams::fit(train, NormScope::TrainOnly),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: ModelKind,
    pub label_mode: LabelMode,
    pub normalization: NormScope,
    pub test_fraction: f64,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainSettings<'a> {
    pub kind: ModelKind,
    pub hyper: &'a Hyperparameters,
    pub seed: u64,
    pub test_fraction: f64,
    pub scope: NormScope,
}

/// Stratified split, normalization, training and held-out evaluation.
pub fn train_and_test(table: &FeatureTable, s: TrainSettings<'_>) -> Result<(TrainedModel, TrainReport)> {
    let (train_idx, test_idx) = stratified_split_indices(table, s.test_fraction, s.seed)?;
    let train = table.subset(&train_idx);
    let test = table.subset(&test_idx);
    let norm = fit_norm(table, &train, s.scope)?;
    let model = learn::train_normalized(s.kind, &train, &norm, s.hyper, s.seed)?;
    let confusion = eval::evaluate(&model, &test)?;
    let report = TrainReport {
        kind: s.kind,
        label_mode: table.label_mode(),
        normalization: s.scope,
        test_fraction: s.test_fraction,
        seed: s.seed,
        train_size: train.len(),
        test_size: test.len(),
        metrics: eval::metrics(&confusion)?,
        confusion,
    };
    Ok((model, report))
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        format!(
            "model {} | labels {} | normalization {} | split {}/{} (test fraction {}) | seed {}\n{}",
            self.kind,
            self.label_mode.name(),
            self.normalization.name(),
            self.train_size,
            self.test_size,
            self.test_fraction,
            self.seed,
            self.metrics.to_text()
        )
    }
}

/// Writes `<models_dir>/<kind>.json`, `<reports_dir>/<kind>_test.{json,txt}`
/// and the confusion CSV.
pub fn write_test_outputs(
    model: &TrainedModel,
    report: &TrainReport,
    models_dir: &Path,
    reports_dir: &Path,
) -> Result<()> {
    let name = report.kind.name();
    create_dir(models_dir)?;
    model.save(&models_dir.join(format!("{name}.json")))?;
    write_json(&reports_dir.join(format!("{name}_test.json")), report)?;
    write_file(&reports_dir.join(format!("{name}_test.txt")), report.to_text())?;
    write_file(
        &reports_dir.join(format!("{name}_test_confusion.csv")),
        report.confusion.to_csv(),
    )
}

/// Trains on the split and writes outputs under `out_dir/models` and
/// `out_dir/reports`.
pub fn train(table: &FeatureTable, s: TrainSettings<'_>, out_dir: &Path) -> Result<TrainReport> {
    let (model, report) = train_and_test(table, s)?;
    write_test_outputs(&model, &report, &out_dir.join("models"), &out_dir.join("reports"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: ModelKind,
    pub label_mode: LabelMode,
    pub normalization: NormScope,
    pub cross_validation: CrossValidation,
}

/// Stratified k-fold cross-validation. Under `train-only` scope each fold
/// fits its own normalization on its training part.
pub fn cross_validate(
    table: &FeatureTable,
    kind: ModelKind,
    hyper: &Hyperparameters,
    k: usize,
    seed: u64,
    scope: NormScope,
) -> Result<ValidationReport> {
    let whole = NormParams::fit(table, NormScope::Whole)?;
    let cv = eval::cross_validate(
        |train, fold_seed| {
            let norm = match scope {
                NormScope::Whole => whole.clone(),
                NormScope::TrainOnly => NormParams::fit(train, NormScope::TrainOnly)?,
            };
            learn::train_normalized(kind, train, &norm, hyper, fold_seed)
        },
        table,
        k,
        seed,
    )?;
    Ok(ValidationReport {
        kind,
        label_mode: table.label_mode(),
        normalization: scope,
        cross_validation: cv,
    })
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        let cv = &self.cross_validation;
        let mut out = format!(
            "model {} | labels {} | normalization {} | {}-fold | seed {}\n",
            self.kind,
            self.label_mode.name(),
            self.normalization.name(),
            cv.k,
            cv.seed
        );
        for f in &cv.folds {
            out.push_str(&format!(
                "fold {}: accuracy {:.4} ({} records)\n",
                f.fold + 1,
                f.metrics.accuracy,
                f.metrics.total
            ));
        }
        out.push_str("aggregate:\n");
        out.push_str(&cv.aggregate.to_text());
        out
    }
}

/// Writes `<reports_dir>/<kind>_cv.{json,txt}` and the aggregate confusion CSV.
pub fn write_cv_outputs(report: &ValidationReport, reports_dir: &Path) -> Result<()> {
    let name = report.kind.name();
    write_json(&reports_dir.join(format!("{name}_cv.json")), report)?;
    write_file(&reports_dir.join(format!("{name}_cv.txt")), report.to_text())?;
    write_file(
        &reports_dir.join(format!("{name}_cv_confusion.csv")),
        report.cross_validation.confusion.to_csv(),
    )
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub run_dir: PathBuf,
    pub tests: Vec<TrainReport>,
    pub validations: Vec<ValidationReport>,
}

/// Full run: images, features, EDA, PCA, every model on the split, and
/// cross-validation, for each label mode. Layout under the run directory:
/// `run.toml`, `images/`, `features/`, `eda/<mode>/`, `pca/<mode>/`,
/// `models/<mode>/`, `reports/<mode>/`, `reports/summary.txt`.
pub fn pipeline(config: &RunConfig) -> Result<PipelineSummary> {
    config.validate()?;
    // fail before touching the corpus if the map is unusable
    ClassMap::load(&config.corpus.class_map)?;
    let run_dir = config.run_dir();
    create_dir(&run_dir)?;
    write_file(&run_dir.join("run.toml"), config.render())?;

    let csvs = extract(config, &run_dir, config.corpus.write_images)?;
    let mut tests = Vec::new();
    let mut validations = Vec::new();
    let mut summary = String::from("label_mode,model,test_accuracy,cv_accuracy\n");
    for (mode, csv) in csvs {
        let table = dataset::read_csv(&csv, mode)?;
        let m = mode.name();
        eda(&table, &config.eda.pairs, &run_dir.join("eda").join(m))?;
        pca(&table, &config.pca, &run_dir.join("pca").join(m))?;
        for &kind in &config.models.kinds {
            let settings = TrainSettings {
                kind,
                hyper: &config.models.hyperparameters,
                seed: config.run.seed,
                test_fraction: config.evaluation.test_fraction,
                scope: config.normalization.scope,
            };
            let (model, report) = train_and_test(&table, settings)?;
            let reports = run_dir.join("reports").join(m);
            write_test_outputs(&model, &report, &run_dir.join("models").join(m), &reports)?;
            let cv = cross_validate(
                &table,
                kind,
                &config.models.hyperparameters,
                config.evaluation.k,
                config.run.seed,
                config.normalization.scope,
            )?;
            write_cv_outputs(&cv, &reports)?;
            summary.push_str(&format!(
                "{m},{},{:.4},{:.4}\n",
                kind.name(),
                report.metrics.accuracy,
                cv.cross_validation.aggregate.accuracy
            ));
            tests.push(report);
            validations.push(cv);
        }
    }
    write_file(&run_dir.join("reports").join("summary.csv"), summary)?;
    Ok(PipelineSummary {
        run_dir,
        tests,
        validations,
    })
}
