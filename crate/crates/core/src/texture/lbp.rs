//! Radius-1, 8-neighbor local binary patterns.

use serde::{Deserialize, Serialize};

use super::entropy_bits;
use crate::binimg::GrayImage;
use crate::error::{Error, Result};

/// `(row, col)` displacement of the neighbor that sets bit `b`: east first,
/// then counter-clockwise.
pub const NEIGHBORS: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpFeatures {
    pub lbp_energy: f64,
    pub lbp_entropy: f64,
}

/// LBP code of every interior pixel, row-major. A bit is set when the
/// neighbor is at least as bright as the center.
pub fn lbp_codes(img: &GrayImage) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmallForLbp);
    }
    let px = img.pixels();
    let mut codes = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let center = px[r * w + c];
            let mut code = 0u8;
            for (bit, &(dr, dc)) in NEIGHBORS.iter().enumerate() {
                let nr = (r as isize + dr) as usize;
                let nc = (c as isize + dc) as usize;
                if px[nr * w + nc] >= center {
                    code |= 1 << bit;
                }
            }
            codes.push(code);
        }
    }
    Ok(codes)
}

/// Normalized 256-bin histogram of interior LBP codes.
pub fn lbp_histogram(img: &GrayImage) -> Result<[f64; 256]> {
    let codes = lbp_codes(img)?;
    let mut counts = [0u64; 256];
    for c in &codes {
        counts[*c as usize] += 1;
    }
    let n = codes.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

/// Energy (Σ h²) and entropy in bits of a normalized code histogram.
pub fn histogram_features(hist: &[f64; 256]) -> LbpFeatures {
    LbpFeatures {
        lbp_energy: hist.iter().map(|h| h * h).sum(),
        lbp_entropy: entropy_bits(hist.iter().copied()),
    }
}

pub fn lbp_features(img: &GrayImage) -> Result<LbpFeatures> {
    Ok(histogram_features(&lbp_histogram(img)?))
}
