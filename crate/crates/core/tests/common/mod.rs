//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use malvis::dataset::{FeatureTable, LabelMode};
use malvis::texture::FeatureRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

/// Table labeled by `label` in both label modes.
pub fn table_from_rows(names: &[String], rows: &[(String, Vec<f64>)]) -> FeatureTable {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, (label, values))| {
            let values: IndexMap<String, f64> =
                names.iter().cloned().zip(values.iter().copied()).collect();
            let mut r = FeatureRecord::unlabeled(format!("{label}/{i}"), values);
            r.family = label.clone();
            r.main_class = label.clone();
            r
        })
        .collect();
    FeatureTable::new(names.to_vec(), records, LabelMode::Main).unwrap()
}

/// `classes × per_class` samples in `d` dimensions. Class `c` has mean
/// `separation` on axis `c % d` and 0 elsewhere, unit within-class std.
pub fn gaussian_blobs(classes: usize, per_class: usize, d: usize, separation: f64, seed: u64) -> FeatureTable {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let x: Vec<f64> = (0..d)
                .map(|j| normal(&mut r) + if j == c % d { separation } else { 0.0 })
                .collect();
            rows.push((format!("class{c}"), x));
        }
    }
    table_from_rows(&feature_names(d), &rows)
}

/// Naive GLCM: enumerates every ordered pair of pixel positions and keeps
/// those whose displacement equals an offset.
pub fn naive_glcm(values: &[u8], w: usize, h: usize, levels: usize, offsets: &[(isize, isize)], symmetric: bool) -> Vec<f64> {
    let mut counts = vec![0.0; levels * levels];
    for &(dr, dc) in offsets {
        for r1 in 0..h {
            for c1 in 0..w {
                for r2 in 0..h {
                    for c2 in 0..w {
                        if r2 as isize - r1 as isize == dr && c2 as isize - c1 as isize == dc {
                            let a = values[r1 * w + c1] as usize;
                            let b = values[r2 * w + c2] as usize;
                            counts[a * levels + b] += 1.0;
                            if symmetric {
                                counts[b * levels + a] += 1.0;
                            }
                        }
                    }
                }
            }
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Six GLCM statistics straight from their textbook sums.
pub fn naive_glcm_features(p: &[f64], levels: usize) -> [f64; 6] {
    let at = |i: usize, j: usize| p[i * levels + j];
    let mut energy = 0.0;
    let mut entropy = 0.0;
    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut homogeneity = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = at(i, j);
            let d = i as f64 - j as f64;
            energy += v * v;
            if v > 0.0 {
                entropy -= v * v.log2();
            }
            contrast += v * d * d;
            dissimilarity += v * d.abs();
            homogeneity += v / (1.0 + d * d);
        }
    }
    let mu_i: f64 = (0..levels).flat_map(|i| (0..levels).map(move |j| (i, j))).map(|(i, j)| i as f64 * at(i, j)).sum();
    let mu_j: f64 = (0..levels).flat_map(|i| (0..levels).map(move |j| (i, j))).map(|(i, j)| j as f64 * at(i, j)).sum();
    let mut var_i = 0.0;
    let mut var_j = 0.0;
    let mut cov = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            let v = at(i, j);
            var_i += v * (i as f64 - mu_i).powi(2);
            var_j += v * (j as f64 - mu_j).powi(2);
            cov += v * (i as f64 - mu_i) * (j as f64 - mu_j);
        }
    }
    let correlation = if var_i <= 1e-15 || var_j <= 1e-15 {
        1.0
    } else {
        (cov / (var_i * var_j).sqrt()).clamp(-1.0, 1.0)
    };
    [energy, entropy.max(0.0), contrast, dissimilarity, homogeneity, correlation]
}

/// `n` draws whose sample correlation is exactly `r`: two independent
/// normal columns are centered, the second is orthogonalized against the
/// first, both are scaled to unit sample variance, then mixed.
pub fn correlated_pairs(n: usize, r: f64, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut g = rng(seed);
    let mut a: Vec<f64> = (0..n).map(|_| normal(&mut g)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| normal(&mut g)).collect();
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    center(&mut a);
    center(&mut b);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let proj = dot(&b, &a) / dot(&a, &a);
    b.iter_mut().zip(&a).for_each(|(y, x)| *y -= proj * x);
    let scale = |v: &mut Vec<f64>| {
        let s = (dot(v, v) / (n - 1) as f64).sqrt();
        v.iter_mut().for_each(|x| *x /= s);
    };
    scale(&mut a);
    scale(&mut b);
    let s = (1.0 - r * r).sqrt();
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { "a" } else { "b" };
            (label.to_string(), vec![3.0 + 2.0 * a[i], -1.0 + 0.5 * (r * a[i] + s * b[i])])
        })
        .collect()
}

pub const FAMILIES: [&str; 6] = ["constant", "uniform", "periodic", "sparse", "ramp", "twolevel"];

/// Bytes for one synthetic sample of `family`.
pub fn family_bytes(family: &str, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let len = rng.gen_range(2048..3072);
    match family {
        "constant" => vec![rng.gen(); len],
        "uniform" => (0..len).map(|_| rng.gen()).collect(),
        "periodic" => {
            let period = rng.gen_range(4..12);
            let pattern: Vec<u8> = (0..period).map(|_| rng.gen()).collect();
            (0..len).map(|i| pattern[i % period]).collect()
        }
        "sparse" => (0..len)
            .map(|_| if rng.gen_bool(0.05) { rng.gen_range(1..=255) } else { 0 })
            .collect(),
        "ramp" => {
            let start: u8 = rng.gen();
            (0..len).map(|i| start.wrapping_add((i / 8) as u8)).collect()
        }
        "twolevel" => {
            let (a, b) = (rng.gen_range(0..64u8), rng.gen_range(192..=255u8));
            let mut out = Vec::with_capacity(len);
            let mut high = false;
            while out.len() < len {
                let run = rng.gen_range(16..96);
                out.extend(std::iter::repeat_n(if high { b } else { a }, run));
                high = !high;
            }
            out.truncate(len);
            out
        }
        other => panic!("unknown family {other}"),
    }
}

/// Writes `<root>/<family>/sample_NNN.bin` for every family and a class map
/// pairing families into three main classes. Returns the class map path.
pub fn write_corpus(root: &Path, per_family: usize, seed: u64) -> PathBuf {
    let mut r = rng(seed);
    let corpus = root.join("corpus");
    for family in FAMILIES {
        let dir = corpus.join(family);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_family {
            fs::write(dir.join(format!("sample_{i:03}.bin")), family_bytes(family, &mut r)).unwrap();
        }
    }
    let map = root.join("class_map.tsv");
    let mains = ["flat", "noisy", "structured", "noisy", "structured", "flat"];
    let text: String = FAMILIES
        .iter()
        .zip(mains)
        .map(|(f, m)| format!("{f}\t{m}\n"))
        .collect();
    fs::write(&map, text).unwrap();
    map
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
