//! Block-DCT compression round trip and the Comr residual feature.
//!
//! The codec is a JPEG-style luminance pipeline: scale to 0..255, shift by
//! −128, 8×8 blocks (edge blocks padded by edge replication), orthonormal
//! DCT, quantization by the Annex-K luminance table scaled by quality,
//! inverse DCT, rescale, clamp. No entropy coding and no chroma — only the
//! reconstruction error matters here.

use thiserror::Error;

use crate::imagecore::{to_grayscale, ImageError, ImageTensor};

#[derive(Debug, Error)]
pub enum CompressionError {
    #[error("quality {0} out of range 1..=100")]
    BadQuality(u32),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Standard JPEG luminance quantization table (Annex K).
const BASE_TABLE: [u32; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Quality-scaled quantization table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantSpec {
    pub quality: u32,
    pub table: [u32; 64],
}

impl QuantSpec {
    /// Scale rule: `scale = 5000/q` for q < 50 else `200 − 2q`;
    /// `entry' = clamp(⌊(entry·scale + 50)/100⌋, 1, 255)`.
    pub fn from_quality(quality: u32) -> Result<Self, CompressionError> {
        if !(1..=100).contains(&quality) {
            return Err(CompressionError::BadQuality(quality));
        }
        let scale = if quality < 50 { 5000 / quality } else { 200 - 2 * quality };
        let mut table = [0u32; 64];
        for (t, &base) in table.iter_mut().zip(BASE_TABLE.iter()) {
            *t = ((base * scale + 50) / 100).clamp(1, 255);
        }
        Ok(Self { quality, table })
    }

    /// All-ones table (round-off only), used by tests.
    pub fn unit() -> Self {
        Self { quality: 100, table: [1; 64] }
    }
}

fn dct_alpha(u: usize) -> f64 {
    if u == 0 {
        (1.0f64 / 8.0).sqrt()
    } else {
        0.5
    }
}

/// Orthonormal type-II 2D DCT of one 8×8 block.
pub fn dct8(block: &[f64; 64]) -> [f64; 64] {
    let mut out = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                for y in 0..8 {
                    acc += block[x * 8 + y]
                        * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * std::f64::consts::PI / 16.0).cos();
                }
            }
            out[u * 8 + v] = dct_alpha(u) * dct_alpha(v) * acc;
        }
    }
    out
}

/// Inverse of `dct8`.
pub fn idct8(coefs: &[f64; 64]) -> [f64; 64] {
    let mut out = [0.0; 64];
    for x in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                for v in 0..8 {
                    acc += dct_alpha(u)
                        * dct_alpha(v)
                        * coefs[u * 8 + v]
                        * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * std::f64::consts::PI / 16.0).cos();
                }
            }
            out[x * 8 + y] = acc;
        }
    }
    out
}

/// Compress-and-reconstruct round trip on a single-channel image.
pub fn roundtrip(img: &ImageTensor, q: &QuantSpec) -> Result<ImageTensor, CompressionError> {
    assert_eq!(img.channels(), 1, "roundtrip needs C=1");
    let (h, w) = (img.height(), img.width());
    let bh = h.div_ceil(8) * 8;
    let bw = w.div_ceil(8) * 8;
    // Pad by edge replication on the 0..255, −128-shifted scale.
    let mut padded = vec![0.0f64; bh * bw];
    for y in 0..bh {
        for x in 0..bw {
            let sy = y.min(h - 1);
            let sx = x.min(w - 1);
            padded[y * bw + x] = img.at(sy, sx) * 255.0 - 128.0;
        }
    }
    for by in (0..bh).step_by(8) {
        for bx in (0..bw).step_by(8) {
            let mut block = [0.0f64; 64];
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = padded[(by + y) * bw + bx + x];
                }
            }
            let mut coefs = dct8(&block);
            for (c, &t) in coefs.iter_mut().zip(q.table.iter()) {
                let t = t as f64;
                *c = (*c / t).round() * t;
            }
            let rec = idct8(&coefs);
            for y in 0..8 {
                for x in 0..8 {
                    padded[(by + y) * bw + bx + x] = rec[y * 8 + x];
                }
            }
        }
    }
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            data.push(((padded[y * bw + x] + 128.0) / 255.0).clamp(0.0, 1.0));
        }
    }
    Ok(ImageTensor::new(h, w, 1, data)?)
}

/// Absolute reconstruction residual of the grayscaled input.
pub fn comr_features(img: &ImageTensor, q: &QuantSpec) -> Result<ImageTensor, CompressionError> {
    let gray = to_grayscale(img)?;
    let rec = roundtrip(&gray, q)?;
    let data: Vec<f64> = gray
        .data()
        .iter()
        .zip(rec.data())
        .map(|(&a, &b)| (a - b).abs().clamp(0.0, 1.0))
        .collect();
    Ok(ImageTensor::new(gray.height(), gray.width(), 1, data)?)
}
