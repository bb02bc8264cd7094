//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use malvis::binimg::GrayImage;
use malvis::cli::{self, RunConfig, TrainSettings};
use malvis::dataset::{LabelMode, NormScope};
use malvis::eval;
use malvis::learn::{logistic, Hyperparameters, ModelKind};
use malvis::pca::{self, PcaMode, PcaModel};
use malvis::texture::glcm::QuantizedImage;
use malvis::texture::{self, compute_glcm, glcm_features, ExtractionConfig, Glcm};
use rand::Rng;

use common::*;

type Check = fn() -> String;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("GLCM oracle equivalence", glcm_oracle),
        ("feature closed forms", closed_forms),
        ("PCA on correlated 2-D data", pca_correlated),
        ("classifier sanity", classifier_sanity),
        ("LR gradient check", gradient_check),
        ("end-to-end pipeline", end_to_end),
        ("metrics formulas", metrics_formulas),
        ("determinism", determinism),
        ("report fidelity", report_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail}; {secs:.2} s)", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL criterion {}: {name} ({msg}; {secs:.2} s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn within(start: Instant, limit: Duration) {
    let e = start.elapsed();
    assert!(e < limit, "took {e:?}, limit {limit:?}");
}

fn glcm_oracle() -> String {
    let start = Instant::now();
    let mut r = rng(1);
    let candidates = [(0, 1), (1, 1), (1, 0), (1, -1), (0, 2), (2, -1), (-1, 0), (0, -3)];
    let mut compared = 0;
    let mut empty = 0;
    for _ in 0..500 {
        let (w, h) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let levels = r.gen_range(2..=4);
        let values: Vec<u8> = (0..w * h).map(|_| r.gen_range(0..levels as u8)).collect();
        let n_off = r.gen_range(1..=4);
        let offsets: Vec<(isize, isize)> = (0..n_off)
            .map(|_| candidates[r.gen_range(0..candidates.len())])
            .collect();
        let symmetric = r.gen_bool(0.5);
        let q = QuantizedImage::new(w, h, levels, values.clone()).unwrap();
        let oracle = naive_glcm(&values, w, h, levels, &offsets, symmetric);
        match compute_glcm(&q, &offsets, symmetric) {
            Ok(g) => {
                for (a, b) in g.probs().iter().zip(&oracle) {
                    assert!((a - b).abs() <= 1e-12, "GLCM cell {a} vs oracle {b}");
                }
                let got = glcm_features(&g).to_array();
                let want = naive_glcm_features(&oracle, levels);
                for (k, (a, b)) in got.iter().zip(want).enumerate() {
                    assert!((a - b).abs() <= 1e-12, "feature {k}: {a} vs oracle {b}");
                }
                compared += 1;
            }
            Err(_) => {
                assert!(oracle.iter().all(|v| v.is_nan()), "pairs exist but GLCM failed");
                empty += 1;
            }
        }
    }
    within(start, Duration::from_secs(10));
    format!("{compared} images matched, {empty} without pixel pairs")
}

fn closed_forms() -> String {
    let img = GrayImage::filled(64, 64, 77).unwrap();
    let rec = texture::extract_features(&img, &ExtractionConfig::default()).unwrap();
    let expected = [
        ("energy", 1.0),
        ("entropy", 0.0),
        ("contrast", 0.0),
        ("dissimilarity", 0.0),
        ("homogeneity", 1.0),
        ("correlation", 1.0),
        ("lbp_energy", 1.0),
        ("lbp_entropy", 0.0),
        ("gabor_energy", 0.0),
        ("gabor_entropy", 0.0),
    ];
    let got: Vec<(&str, f64)> = rec.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(got, expected);

    let uniform = [1.0 / 256.0; 256];
    let h = texture::lbp::histogram_features(&uniform).lbp_entropy;
    assert!((h - 8.0).abs() <= 1e-9, "uniform LBP entropy {h}");

    for levels in [2, 3, 8, 32] {
        let mut probs = vec![0.0; levels * levels];
        for i in 0..levels {
            probs[i * levels + (levels - 1 - i)] = 1.0 / levels as f64;
        }
        let c = glcm_features(&Glcm::from_probs(levels, probs).unwrap()).correlation;
        assert!((c + 1.0).abs() <= 1e-9, "anti-diagonal correlation {c} at {levels} levels");
    }
    "constant tuple exact, LBP entropy 8, anti-diagonal correlation -1".into()
}

fn pca_correlated() -> String {
    let start = Instant::now();
    let names = feature_names(2);
    let table = table_from_rows(&names, &correlated_pairs(1000, 0.9, 3));
    let model = pca::fit_pca_with(&table, 0.95, PcaMode::Correlation).unwrap();
    let (l1, l2) = (model.eigenvalues[0], model.eigenvalues[1]);
    assert!((l1 - 1.9).abs() <= 0.05 * 1.9, "first eigenvalue {l1}");
    assert!((l2 - 0.1).abs() <= 0.05 * 0.1, "second eigenvalue {l2}");
    assert_eq!(model.retained, 1, "variance target 0.95 retained {}", model.retained);

    for (i, a) in model.components.iter().enumerate() {
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9, "row {i} norm {norm}");
        for b in &model.components[i + 1..] {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            assert!(dot.abs() <= 1e-8, "rows not orthogonal: {dot}");
        }
    }

    let scores: Vec<Vec<f64>> = table
        .records()
        .iter()
        .map(|rec| model.transform_full(rec).unwrap())
        .collect();
    let n = scores.len() as f64;
    for c in 0..2 {
        for e in 0..2 {
            let mc = scores.iter().map(|s| s[c]).sum::<f64>() / n;
            let me = scores.iter().map(|s| s[e]).sum::<f64>() / n;
            let cov = scores.iter().map(|s| (s[c] - mc) * (s[e] - me)).sum::<f64>() / (n - 1.0);
            let want = if c == e { model.eigenvalues[c] } else { 0.0 };
            assert!((cov - want).abs() <= 1e-6, "score covariance ({c},{e}) = {cov}, want {want}");
        }
    }
    for rec in table.records() {
        let z = model.standardize(rec).unwrap();
        let back = model.inverse_transform(&model.transform_full(rec).unwrap());
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-8, "reconstruction {b} vs {a}");
        }
    }
    within(start, Duration::from_secs(5));
    format!("eigenvalues {l1:.4}, {l2:.4}; 1 component retained")
}

fn classifier_sanity() -> String {
    let start = Instant::now();
    let table = gaussian_blobs(6, 100, 10, 6.0, 4);
    let hyper = Hyperparameters::default();
    let mut parts = Vec::new();
    for kind in ModelKind::ALL {
        let settings = TrainSettings {
            kind,
            hyper: &hyper,
            seed: 11,
            test_fraction: 0.2,
            scope: NormScope::TrainOnly,
        };
        let (_, report) = cli::train_and_test(&table, settings).unwrap();
        let split = report.metrics.accuracy;
        assert_eq!(report.test_size, 120);
        let cv = cli::cross_validate(&table, kind, &hyper, 2, 11, NormScope::TrainOnly)
            .unwrap()
            .cross_validation
            .aggregate
            .accuracy;
        assert!(split >= 0.95, "{kind} split accuracy {split}");
        assert!((cv - split).abs() <= 0.05, "{kind} CV accuracy {cv} vs split {split}");
        parts.push(format!("{kind} {split:.3}/{cv:.3}"));
    }
    within(start, Duration::from_secs(60));
    format!("split/CV accuracy: {}", parts.join(", "))
}

fn gradient_check() -> String {
    let mut g = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, d, k) = (g.gen_range(5..40), g.gen_range(1..6), g.gen_range(2..5));
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| g.gen::<f64>()).collect()).collect();
        let targets: Vec<usize> = (0..n).map(|_| g.gen_range(0..k)).collect();
        let w: Vec<f64> = (0..k * (d + 1)).map(|_| normal(&mut g)).collect();
        let l2 = 1e-4;
        let (_, analytic) = logistic::loss_and_gradient(&w, k, &rows, &targets, l2);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..w.len())
            .map(|i| {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[i] += h;
                minus[i] -= h;
                let lp = logistic::loss_and_gradient(&plus, k, &rows, &targets, l2).0;
                let lm = logistic::loss_and_gradient(&minus, k, &rows, &targets, l2).0;
                (lp - lm) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / na.max(nn).max(1e-12);
        assert!(rel < 1e-5, "relative gradient error {rel}");
        worst = worst.max(rel);
    }
    format!("worst relative error {worst:.2e} over 20 configurations")
}

fn pipeline_config(root: &std::path::Path, per_family: usize, seed: u64) -> RunConfig {
    let map = write_corpus(root, per_family, seed);
    RunConfig::new(seed, root.join("out"), root.join("corpus"), map)
}

fn end_to_end() -> String {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_config(dir.path(), 60, 21);
    let summary = cli::pipeline(&config).unwrap();
    let forest = |mode: LabelMode| {
        summary
            .tests
            .iter()
            .find(|r| r.kind == ModelKind::Forest && r.label_mode == mode)
            .unwrap()
            .metrics
            .accuracy
    };
    let (sub, main) = (forest(LabelMode::Sub), forest(LabelMode::Main));
    assert!(sub >= 0.9, "forest accuracy over families {sub}");
    assert!(main >= 0.9, "forest accuracy over main classes {main}");
    let images = summary.run_dir.join("images");
    let n_images = FAMILIES
        .iter()
        .map(|f| std::fs::read_dir(images.join(f)).unwrap().count())
        .sum::<usize>();
    assert_eq!(n_images, 360);
    let first = snapshot(&summary.run_dir);
    cli::pipeline(&config).unwrap();
    let second = snapshot(&summary.run_dir);
    assert_eq!(first.len(), second.len());
    for (path, bytes) in &first {
        assert!(second.get(path) == Some(bytes), "{} differs on rerun", path.display());
    }
    within(start, Duration::from_secs(300));
    format!(
        "forest accuracy {sub:.3} (families), {main:.3} (main classes); rerun identical over {} files",
        first.len()
    )
}

fn metrics_formulas() -> String {
    let mut g = rng(6);
    for _ in 0..200 {
        let k = g.gen_range(2..=6);
        let labels: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let n = g.gen_range(1..=200);
        let pairs: Vec<(usize, usize)> = (0..n).map(|_| (g.gen_range(0..k), g.gen_range(0..k))).collect();
        let preds: Vec<&str> = pairs.iter().map(|p| labels[p.0].as_str()).collect();
        let truths: Vec<&str> = pairs.iter().map(|p| labels[p.1].as_str()).collect();
        let cm = eval::confusion(&preds, &truths, &labels).unwrap();
        let m = eval::metrics(&cm).unwrap();
        for (c, name) in labels.iter().enumerate() {
            let tp = pairs.iter().filter(|&&(p, t)| p == c && t == c).count() as f64;
            let fp = pairs.iter().filter(|&&(p, t)| p == c && t != c).count() as f64;
            let fn_ = pairs.iter().filter(|&&(p, t)| p != c && t == c).count() as f64;
            let cls = &m.per_class[name];
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
            assert_eq!(cls.precision, precision);
            assert_eq!(cls.recall, recall);
            assert_eq!(cls.precision_undefined, tp + fp == 0.0);
            assert_eq!(cls.recall_undefined, tp + fn_ == 0.0);
            assert_eq!(cls.support as f64, tp + fn_);
        }
        let correct = pairs.iter().filter(|(p, t)| p == t).count() as f64;
        assert!((m.accuracy - correct / n as f64).abs() <= 1e-12);
        let identity: f64 = m.per_class.values().map(|c| c.recall * c.support as f64).sum::<f64>() / n as f64;
        assert!((m.accuracy - identity).abs() <= 1e-12, "accuracy {} vs {identity}", m.accuracy);
    }
    "200 random confusion matrices".into()
}

fn determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_config(dir.path(), 30, 8);
    let run_dir = cli::pipeline(&config).unwrap().run_dir;
    let first = snapshot(&run_dir);
    std::fs::remove_dir_all(&run_dir).unwrap();
    cli::pipeline(&config).unwrap();
    let second = snapshot(&run_dir);
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "different file sets"
    );
    for (path, bytes) in &first {
        assert!(&second[path] == bytes, "{} differs between runs", path.display());
    }
    let count = |ext: &str| first.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    let models = first.keys().filter(|p| p.starts_with("models")).count();
    assert_eq!(models, 6, "expected 3 models per label mode");
    format!(
        "{} files identical ({models} models, {} CSVs, {} JSON, {} text reports)",
        first.len(),
        count("csv"),
        count("json"),
        count("txt")
    )
}

/// Hand-built model exercising sign rendering, rounding, ties broken by
/// feature order, the term limit and indicator-column names.
pub fn fixture_model() -> PcaModel {
    let names = [
        "Energy",
        "LBP energy",
        "Homogeneity",
        "Dissimilarity",
        "LBP entropy",
        "Contrast",
        "Malware_class=Allaple.A",
    ];
    let d = names.len();
    PcaModel {
        mode: PcaMode::Correlation,
        variance_target: 0.95,
        feature_names: names.iter().map(|s| s.to_string()).collect(),
        dropped: vec![],
        means: vec![0.0; d],
        scales: vec![1.0; d],
        eigenvalues: vec![9.192, 0.5, 0.2, 0.108, 0.0, 0.0, 0.0],
        components: vec![
            vec![-0.345, -0.342, -0.342, 0.34, 0.339, 0.2, -0.1],
            vec![0.342, -0.0004, -0.341, 0.0004, 0.0, 0.002, 0.3],
            vec![0.05, 0.1, 0.2, -0.3, 0.25, 0.0, -0.567],
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ],
        retained: 3,
    }
}

fn report_fidelity() -> String {
    let lines = pca::ranked_report(&fixture_model(), 5);
    let mut text = lines.join("\n");
    text.push('\n');
    let golden = include_str!("golden/ranked_report.txt");
    assert_eq!(text, golden, "ranked report differs from golden file");
    "3 lines byte-exact against golden file".into()
}
