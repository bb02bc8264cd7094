//! Even/odd Gabor filter bank and its energy statistics.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::entropy_bits;
use crate::binimg::GrayImage;
use crate::error::{Error, Result};

/// Bank construction parameters. `sigma = sigma_factor / frequency`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborParams {
    /// Cycles per pixel, each in (0, 0.5].
    pub frequencies: Vec<f64>,
    /// Radians.
    pub orientations: Vec<f64>,
    pub sigma_factor: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            frequencies: vec![0.125, 0.25],
            orientations: vec![0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4],
            sigma_factor: 0.56,
        }
    }
}

/// Quadrature kernel pair, `side × side`, row-major with the origin at the
/// center.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub frequency: f64,
    pub orientation: f64,
    pub sigma: f64,
    pub side: usize,
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    kernels: Vec<GaborKernel>,
}

impl GaborBank {
    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    pub fn max_side(&self) -> usize {
        self.kernels.iter().map(|k| k.side).max().unwrap_or(0)
    }
}

/// Isotropic Gaussian envelope times a cosine/sine carrier along
/// `x cos θ + y sin θ`, where `x` is the column and `y` the row displacement.
pub fn gabor_value(frequency: f64, orientation: f64, sigma: f64, x: f64, y: f64) -> (f64, f64) {
    let along = x * orientation.cos() + y * orientation.sin();
    let envelope = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
    let phase = 2.0 * PI * frequency * along;
    (envelope * phase.cos(), envelope * phase.sin())
}

/// `2 * ceil(3σ) + 1`.
pub fn kernel_side(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil() as usize + 1
}

/// One kernel pair per (frequency, orientation), frequency-major. The even
/// kernel has its mean subtracted so it sums to zero.
pub fn build_gabor_bank(params: &GaborParams) -> Result<GaborBank> {
    if params.frequencies.is_empty() || params.orientations.is_empty() {
        return Err(Error::Param(
            "Gabor bank needs at least one frequency and one orientation".into(),
        ));
    }
    if !(params.sigma_factor.is_finite() && params.sigma_factor > 0.0) {
        return Err(Error::Param(format!(
            "sigma factor must be positive, got {}",
            params.sigma_factor
        )));
    }
    let mut kernels = Vec::new();
    for &frequency in &params.frequencies {
        if !(frequency > 0.0 && frequency <= 0.5) {
            return Err(Error::Param(format!(
                "Gabor frequency {frequency} outside (0, 0.5]"
            )));
        }
        let sigma = params.sigma_factor / frequency;
        let side = kernel_side(sigma);
        let half = (side / 2) as isize;
        for &orientation in &params.orientations {
            if !orientation.is_finite() {
                return Err(Error::Param("Gabor orientation must be finite".into()));
            }
            let mut even = Vec::with_capacity(side * side);
            let mut odd = Vec::with_capacity(side * side);
            for dy in -half..=half {
                for dx in -half..=half {
                    let (e, o) = gabor_value(frequency, orientation, sigma, dx as f64, dy as f64);
                    even.push(e);
                    odd.push(o);
                }
            }
            let mean = even.iter().sum::<f64>() / even.len() as f64;
            even.iter_mut().for_each(|v| *v -= mean);
            kernels.push(GaborKernel {
                frequency,
                orientation,
                sigma,
                side,
                even,
                odd,
            });
        }
    }
    Ok(GaborBank { kernels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborFeatures {
    pub gabor_energy: f64,
    pub gabor_entropy: f64,
}

/// Reflect (mirror without edge repetition) index into `[0, n)`.
#[inline]
fn reflect(i: isize, n: isize) -> usize {
    let mut i = i;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Mean-centered image padded by `pad` on every side with reflected borders.
fn padded(img: &GrayImage, pad: usize) -> (Vec<f64>, usize) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mean = img.pixels().iter().map(|&p| p as f64).sum::<f64>() / img.pixels().len() as f64;
    let pw = img.width() + 2 * pad;
    let ph = img.height() + 2 * pad;
    let mut out = Vec::with_capacity(pw * ph);
    for r in 0..ph as isize {
        let sr = reflect(r - pad as isize, h);
        for c in 0..pw as isize {
            let sc = reflect(c - pad as isize, w);
            out.push(img.get(sr, sc) as f64 - mean);
        }
    }
    (out, pw)
}

/// Mean squared quadrature magnitude of each kernel's same-size response.
///
/// The image is centered on its mean first; the kernels sum to zero so this
/// changes responses only by rounding, and makes constant images respond
/// with exact zeros.
pub fn gabor_energies(img: &GrayImage, bank: &GaborBank) -> Result<Vec<f64>> {
    let max_side = bank.max_side();
    if img.width() < max_side || img.height() < max_side {
        return Err(Error::TooSmallForGabor);
    }
    let pad = max_side / 2;
    let (src, pw) = padded(img, pad);
    let (w, h) = (img.width(), img.height());
    let n = (w * h) as f64;
    let energies = bank
        .kernels
        .iter()
        .map(|k| {
            let half = k.side / 2;
            let off = pad - half;
            let mut acc = 0.0;
            for r in 0..h {
                for c in 0..w {
                    let mut even = 0.0;
                    let mut odd = 0.0;
                    for kr in 0..k.side {
                        let row = &src[(r + off + kr) * pw + c + off..][..k.side];
                        let ke = &k.even[kr * k.side..][..k.side];
                        let ko = &k.odd[kr * k.side..][..k.side];
                        for ((v, a), b) in row.iter().zip(ke).zip(ko) {
                            even += v * a;
                            odd += v * b;
                        }
                    }
                    acc += even * even + odd * odd;
                }
            }
            acc / n
        })
        .collect();
    Ok(energies)
}

/// `gabor_energy` is the bank-mean response energy scaled by 1/255²;
/// `gabor_entropy` is the entropy in bits of the per-kernel energy
/// distribution, 0 when every response is zero.
pub fn gabor_features(img: &GrayImage, bank: &GaborBank) -> Result<GaborFeatures> {
    let energies = gabor_energies(img, bank)?;
    Ok(features_from_energies(&energies))
}

pub fn features_from_energies(energies: &[f64]) -> GaborFeatures {
    let total: f64 = energies.iter().sum();
    let gabor_energy = total / energies.len() as f64 / (255.0 * 255.0);
    let gabor_entropy = if total > 0.0 {
        entropy_bits(energies.iter().map(|e| e / total))
    } else {
        0.0
    };
    GaborFeatures {
        gabor_energy,
        gabor_entropy,
    }
}
