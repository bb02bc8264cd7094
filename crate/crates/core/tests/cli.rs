mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;

fn malvis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_malvis"))
        .args(args)
        .output()
        .expect("spawn malvis")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn example_config(seed: u64) -> String {
    let out = malvis(&["example-config", "--seed", &seed.to_string()]);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

/// Corpus with `per_family` samples per family and a fast config next to it.
fn setup(root: &Path, per_family: usize) -> PathBuf {
    write_corpus(root, per_family, 4);
    let config = example_config(2)
        .replace("write_images = true", "write_images = false")
        .replace("n_trees = 100", "n_trees = 10");
    let path = root.join("run.toml");
    fs::write(&path, config).unwrap();
    path
}

/// Extracts features for a small corpus and returns the main-mode CSV.
fn features(root: &Path) -> PathBuf {
    let config = setup(root, 8);
    let out = malvis(&["extract", "--config", p(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = root.join("runs/seed-2/features/main.csv");
    assert!(csv.is_file());
    csv
}

#[test]
fn convert_files_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bins");
    fs::create_dir(&input).unwrap();
    let mut r = rng(1);
    for (i, fam) in FAMILIES.iter().take(4).enumerate() {
        fs::write(input.join(format!("s{i}.bin")), family_bytes(fam, &mut r)).unwrap();
    }
    let out_dir = dir.path().join("img");
    let out = malvis(&["convert", p(&input), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = snapshot(&out_dir);
    assert_eq!(first.len(), 4);
    assert!(first.keys().all(|k| k.extension().unwrap() == "pgm"));
    assert!(first.values().all(|b| b.starts_with(b"P5\n")));
    assert_eq!(malvis(&["convert", p(&input), "--out", p(&out_dir)]).status.code(), Some(0));
    assert_eq!(snapshot(&out_dir), first);

    fs::write(input.join("empty.bin"), b"").unwrap();
    let out = malvis(&["convert", p(&input), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(snapshot(&out_dir).len(), 4);
}

#[test]
fn pipeline_fails_fast_on_class_map_problems() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 2);
    fs::create_dir(dir.path().join("corpus/unknownfam")).unwrap();
    fs::write(dir.path().join("corpus/unknownfam/a.bin"), vec![1u8; 4096]).unwrap();
    let out = malvis(&["pipeline", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknownfam"));
    assert!(!dir.path().join("runs/seed-2/features").exists());

    fs::remove_file(dir.path().join("class_map.tsv")).unwrap();
    let out = malvis(&["pipeline", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("class_map.tsv"));
}

#[test]
fn extract_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let csv = features(dir.path());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 8 * FAMILIES.len());
    assert_eq!(
        fs::read(csv.with_file_name("sub.csv")).unwrap().len(),
        text.len(),
        "per-mode CSVs carry the same records"
    );
}

#[test]
fn analysis_commands_on_a_feature_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = features(dir.path());
    let out_dir = dir.path().join("out");

    let eda = out_dir.join("eda");
    let out = malvis(&["eda", p(&csv), "--out", p(&eda)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = snapshot(&eda);
    assert_eq!(files.keys().filter(|k| k.extension().unwrap() == "svg").count(), 2);
    assert!(files.contains_key(Path::new("gabor_entropy_vs_lbp_energy.csv")));
    let out = malvis(&["eda", p(&csv), "--out", p(&eda), "--x", "foo", "--y", "energy"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));

    let pca = out_dir.join("pca");
    let out = malvis(&["pca", p(&csv), "--out", p(&pca), "--include-class-indicators"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(pca.join("report.txt")).unwrap();
    assert!(!report.is_empty() && report.ends_with('\n'));
    assert!(pca.join("model.json").is_file());

    for model in ["naive-bayes", "logistic", "forest"] {
        let args = ["train", p(&csv), "--model", model, "--out", p(&out_dir), "--seed", "5"];
        let out = malvis(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = malvis(&["validate", p(&csv), "--model", model, "--out", p(&out_dir), "--seed", "5", "--k", "3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["naive_bayes", "logistic", "forest"] {
        assert!(out_dir.join(format!("models/{name}.json")).is_file());
        for suffix in ["_test.json", "_test.txt", "_test_confusion.csv", "_cv.json", "_cv.txt", "_cv_confusion.csv"] {
            assert!(out_dir.join(format!("reports/{name}{suffix}")).is_file(), "{name}{suffix}");
        }
    }
    let before = snapshot(&out_dir.join("models"));
    let out = malvis(&["train", p(&csv), "--model", "forest", "--out", p(&out_dir), "--seed", "5"]);
    assert!(out.status.success());
    assert_eq!(snapshot(&out_dir.join("models")), before);

    let hyper = dir.path().join("hyper.toml");
    fs::write(&hyper, "[forest]\nn_trees = 3\n").unwrap();
    let small = dir.path().join("small");
    let args = ["train", p(&csv), "--model", "forest", "--out", p(&small), "--seed", "5", "--hyperparameters", p(&hyper)];
    assert!(malvis(&args).status.success());
    let model = fs::read_to_string(small.join("models/forest.json")).unwrap();
    assert!(model.contains("\"n_trees\": 3"));

    let out = malvis(&["train", p(&csv), "--model", "svm", "--out", p(&out_dir), "--seed", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = malvis(&["validate", p(&csv), "--model", "logistic", "--out", p(&out_dir), "--seed", "5", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn example_config_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 3);
    let out = malvis(&["pipeline", "--config", p(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("runs/seed-2/reports/summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("label_mode,model,test_accuracy,cv_accuracy"));
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("runs/seed-2/run.toml").is_file());
}
