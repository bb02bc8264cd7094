//! Labeled corpora, feature tables, CSV persistence, min-max normalization
//! and stratified partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::texture::FeatureRecord;

/// Which label a table classifies by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Coarse class (6 for Malimg-shaped corpora).
    Main,
    /// Family (25 for Malimg-shaped corpora).
    Sub,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Main => "main",
            LabelMode::Sub => "sub",
        }
    }

    pub fn label_of(self, rec: &FeatureRecord) -> &str {
        match self {
            LabelMode::Main => &rec.main_class,
            LabelMode::Sub => &rec.family,
        }
    }
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(LabelMode::Main),
            "sub" => Ok(LabelMode::Sub),
            other => Err(Error::Param(format!(
                "label mode must be \"main\" or \"sub\", got {other:?}"
            ))),
        }
    }
}

/// Labels are written to CSV unquoted, so they are restricted to this set.
pub fn is_valid_label(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Family → main class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMap {
    map: BTreeMap<String, String>,
}

impl ClassMap {
    pub fn new(map: BTreeMap<String, String>) -> Result<Self> {
        for (f, m) in &map {
            for l in [f, m] {
                if !is_valid_label(l) {
                    return Err(Error::Param(format!(
                        "label {l:?} must be non-empty and use only [A-Za-z0-9._-]"
                    )));
                }
            }
        }
        Ok(Self { map })
    }

    /// Two tab-separated columns `family  main_class`; blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::parse(
                    "class map",
                    format!("line {}: expected 2 tab-separated columns", i + 1),
                ));
            }
            if let Some(prev) = map.insert(cols[0].to_string(), cols[1].to_string()) {
                if prev != cols[1] {
                    return Err(Error::parse(
                        "class map",
                        format!("line {}: family {:?} mapped twice", i + 1, cols[0]),
                    ));
                }
            }
        }
        Self::new(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn to_tsv(&self) -> String {
        self.map
            .iter()
            .map(|(f, m)| format!("{f}\t{m}\n"))
            .collect()
    }

    pub fn main_class(&self, family: &str) -> Option<&str> {
        self.map.get(family).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub family: String,
    pub main_class: String,
    /// `<family>/<file name>`
    pub source_id: String,
}

/// Lists every regular file in each immediate subdirectory of `root`, the
/// subdirectory name being the family label. Ordered by (family, file name).
pub fn scan_corpus(root: &Path, class_map: &ClassMap) -> Result<Vec<CorpusEntry>> {
    let mut families = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            families.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    families.sort();
    let unmapped: Vec<String> = families
        .iter()
        .filter(|f| class_map.main_class(f).is_none())
        .cloned()
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::UnmappedFamilies(unmapped));
    }
    let mut out = Vec::new();
    for family in &families {
        let dir = root.join(family);
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            // follows symlinks
            if entry.path().is_file() {
                files.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        files.sort();
        let main = class_map.main_class(family).expect("checked above");
        out.extend(files.into_iter().map(|name| CorpusEntry {
            path: dir.join(&name),
            source_id: format!("{family}/{name}"),
            family: family.clone(),
            main_class: main.to_string(),
        }));
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Per-column `(min, max)` used by min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// Scaled to [0, 1] and clamped; a constant column maps to 0.5.
    pub fn scale(self, x: f64) -> f64 {
        if self.max == self.min {
            0.5
        } else {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    pub fn unscale(self, y: f64) -> f64 {
        if self.max == self.min {
            self.min
        } else {
            self.min + y * (self.max - self.min)
        }
    }
}

/// Where normalization ranges were fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormScope {
    Whole,
    TrainOnly,
}

impl NormScope {
    pub fn name(self) -> &'static str {
        match self {
            NormScope::Whole => "whole",
            NormScope::TrainOnly => "train-only",
        }
    }
}

impl std::str::FromStr for NormScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(NormScope::Whole),
            "train-only" => Ok(NormScope::TrainOnly),
            other => Err(Error::Param(format!(
                "normalization scope must be \"whole\" or \"train-only\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub scope: NormScope,
    pub columns: Vec<ColumnRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    schema: Vec<String>,
    records: Vec<FeatureRecord>,
    label_mode: LabelMode,
    norm_params: Option<NormParams>,
}

impl FeatureTable {
    pub fn new(
        schema: Vec<String>,
        records: Vec<FeatureRecord>,
        label_mode: LabelMode,
    ) -> Result<Self> {
        let set: BTreeSet<&String> = schema.iter().collect();
        if set.len() != schema.len() {
            return Err(Error::Data("duplicate column in schema".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.values.len() != schema.len()
                || r.values.keys().zip(&schema).any(|(a, b)| a != b)
            {
                return Err(Error::Data(format!(
                    "record {i} ({}) does not match the table schema",
                    r.source_id
                )));
            }
            if label_mode.label_of(r).is_empty() {
                return Err(Error::Data(format!(
                    "record {i} ({}) has no {} label",
                    r.source_id,
                    label_mode.name()
                )));
            }
        }
        Ok(Self {
            schema,
            records,
            label_mode,
            norm_params: None,
        })
    }

    /// Table whose schema is taken from the first record.
    pub fn from_records(records: Vec<FeatureRecord>, label_mode: LabelMode) -> Result<Self> {
        let schema = records
            .first()
            .map(|r| r.values.keys().cloned().collect())
            .unwrap_or_default();
        Self::new(schema, records, label_mode)
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn norm_params(&self) -> Option<&NormParams> {
        self.norm_params.as_ref()
    }

    /// Same records classified by another label.
    pub fn with_label_mode(&self, label_mode: LabelMode) -> Result<Self> {
        let mut t = Self::new(self.schema.clone(), self.records.clone(), label_mode)?;
        t.norm_params = self.norm_params.clone();
        Ok(t)
    }

    pub fn label(&self, i: usize) -> &str {
        self.label_mode.label_of(&self.records[i])
    }

    pub fn labels(&self) -> Vec<&str> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Sorted distinct labels.
    pub fn label_set(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.labels().into_iter().collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Record values in schema order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.records[i].values.values().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.values[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }

    /// Records at `indices`, in that order, keeping normalization state.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            label_mode: self.label_mode,
            norm_params: self.norm_params.clone(),
        }
    }

    /// Record indices grouped by label, labels sorted.
    pub fn class_indices(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for i in 0..self.len() {
            out.entry(self.label(i).to_string()).or_default().push(i);
        }
        out
    }

    fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Vec<FeatureRecord> {
        self.records
            .iter()
            .map(|r| {
                let values: IndexMap<String, f64> = r
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, (k, &v))| (k.clone(), f(j, v)))
                    .collect();
                FeatureRecord {
                    values,
                    ..r.clone()
                }
            })
            .collect()
    }
}

/// Rounds a value to 9 significant digits and renders it with '.' decimals.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting round-trips");
    let mag = rounded.abs();
    if (1e-4..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_csv(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write_csv_to(table, &mut out).map_err(|e| Error::io(path, e))?;
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_csv_to(table: &FeatureTable, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "source_id,family,main_class")?;
    for c in &table.schema {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for r in &table.records {
        write!(w, "{},{},{}", r.source_id, r.family, r.main_class)?;
        for v in r.values.values() {
            write!(w, ",{}", format_sig9(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

const FIXED_COLUMNS: [&str; 3] = ["source_id", "family", "main_class"];

pub fn read_csv(path: &Path, label_mode: LabelMode) -> Result<FeatureTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_mode)
}

/// Row numbers in errors are 1-based file lines; the header is row 1.
pub fn parse_csv(text: &str, label_mode: LabelMode) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| csv_err(1, "", e.to_string()))?,
        None => return Err(csv_err(1, "", "missing header")),
    };
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(name) {
            return Err(csv_err(1, name, "missing column"));
        }
    }
    let schema: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let mut records = Vec::new();
    for (k, row) in rows.enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| csv_err(line, "", e.to_string()))?;
        if row.len() != header.len() {
            return Err(csv_err(
                line,
                "",
                format!("expected {} cells, found {}", header.len(), row.len()),
            ));
        }
        let mut values = IndexMap::with_capacity(schema.len());
        for (name, cell) in schema.iter().zip(row.iter().skip(3)) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| csv_err(line, name, format!("non-numeric value {cell:?}")))?;
            values.insert(name.clone(), v);
        }
        records.push(FeatureRecord {
            source_id: row[0].to_string(),
            family: row[1].to_string(),
            main_class: row[2].to_string(),
            values,
        });
    }
    FeatureTable::new(schema, records, label_mode)
}

fn csv_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Rows whose min/max define the normalization.
#[derive(Debug, Clone, Copy)]
pub enum FitScope<'a> {
    Whole,
    /// Fit on this table (typically the training split), apply elsewhere.
    Reference(&'a FeatureTable),
}

impl NormParams {
    pub fn fit(table: &FeatureTable, scope: NormScope) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Data("cannot fit normalization on an empty table".into()));
        }
        let mut columns = Vec::with_capacity(table.schema.len());
        for (j, name) in table.schema.iter().enumerate() {
            let col = table.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column {name:?} has non-finite values")));
            }
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            columns.push(ColumnRange { min, max });
        }
        Ok(Self { scope, columns })
    }

    /// Scales every value of `table`, clamping to [0, 1].
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if self.columns.len() != table.schema.len() {
            return Err(Error::Data(format!(
                "normalization has {} columns, table has {}",
                self.columns.len(),
                table.schema.len()
            )));
        }
        let records = table.map_values(|j, v| self.columns[j].scale(v));
        Ok(FeatureTable {
            schema: table.schema.clone(),
            records,
            label_mode: table.label_mode,
            norm_params: Some(self.clone()),
        })
    }

    pub fn apply_record(&self, schema: &[String], rec: &FeatureRecord) -> Result<FeatureRecord> {
        let mut out = rec.clone();
        for (name, range) in schema.iter().zip(&self.columns) {
            let v = rec.get(name)?;
            out.values.insert(name.clone(), range.scale(v));
        }
        Ok(out)
    }
}

/// Min-max scales every column of `table` to [0, 1].
pub fn normalize(table: &FeatureTable, scope: FitScope<'_>) -> Result<FeatureTable> {
    let params = match scope {
        FitScope::Whole => NormParams::fit(table, NormScope::Whole)?,
        FitScope::Reference(reference) => {
            if reference.schema != table.schema {
                return Err(Error::Data("reference table has a different schema".into()));
            }
            NormParams::fit(reference, NormScope::TrainOnly)?
        }
    };
    params.apply(table)
}

/// Inverts [`normalize`] using the stored ranges.
pub fn denormalize(table: &FeatureTable) -> Result<FeatureTable> {
    let params = table
        .norm_params
        .as_ref()
        .ok_or_else(|| Error::Data("table is not normalized".into()))?;
    Ok(FeatureTable {
        schema: table.schema.clone(),
        records: table.map_values(|j, v| params.columns[j].unscale(v)),
        label_mode: table.label_mode,
        norm_params: None,
    })
}

/// Per class `max(1, round_half_up(n · fraction))` test records, capped so
/// at least one record stays in training.
pub fn test_count(class_size: usize, test_fraction: f64) -> usize {
    let raw = (class_size as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
    raw.max(1).min(class_size - 1)
}

/// Train and test record indices, each sorted ascending.
pub fn stratified_split_indices(
    table: &FeatureTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Param(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let classes = table.class_indices();
    check_class_sizes(&classes, 2)?;
    let mut rng = rng::stream(seed, rng::streams::SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in classes.values() {
        let mut members = members.clone();
        rng::shuffle(&mut members, &mut rng);
        let n_test = test_count(members.len(), test_fraction);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(
    table: &FeatureTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(FeatureTable, FeatureTable)> {
    let (train, test) = stratified_split_indices(table, test_fraction, seed)?;
    Ok((table.subset(&train), table.subset(&test)))
}

fn check_class_sizes(classes: &BTreeMap<String, Vec<usize>>, needed: usize) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::Data("table has no records".into()));
    }
    for (label, members) in classes {
        if members.len() < needed {
            return Err(Error::ClassTooSmall {
                label: label.clone(),
                count: members.len(),
                needed,
            });
        }
    }
    Ok(())
}

/// Validation-fold membership: `folds[f]` lists the record indices validated
/// in fold `f`, sorted ascending.
pub fn kfold_indices(table: &FeatureTable, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Param(format!("k must be at least 2, got {k}")));
    }
    let classes = table.class_indices();
    check_class_sizes(&classes, k)?;
    let mut rng = rng::stream(seed, rng::streams::KFOLD);
    let mut folds = vec![Vec::new(); k];
    // continuing the round-robin across classes keeps total fold sizes within one
    let mut next = 0usize;
    for members in classes.values() {
        let mut members = members.clone();
        rng::shuffle(&mut members, &mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// `k` (train, validation) pairs; every record validates exactly once.
pub fn kfold(table: &FeatureTable, k: usize, seed: u64) -> Result<Vec<(FeatureTable, FeatureTable)>> {
    let folds = kfold_indices(table, k, seed)?;
    Ok((0..k)
        .map(|f| {
            let train: Vec<usize> = (0..table.len())
                .filter(|i| folds[f].binary_search(i).is_err())
                .collect();
            (table.subset(&train), table.subset(&folds[f]))
        })
        .collect())
}
