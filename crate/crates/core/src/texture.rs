//! LBP codes and GLCM statistics (the Text stream).
//!
//! LBP: radius-1, 8-neighbor, ties count as 1 (`s(0) = 1`), bit p at
//! clockwise position starting from the top-left neighbor. GLCM: uniform
//! quantization of [0,1] into L levels, ordered pair counts at a fixed
//! offset, optionally symmetrized, normalized to a probability matrix.

use thiserror::Error;

use crate::imagecore::ImageTensor;

#[derive(Debug, Error)]
pub enum TextureError {
    #[error("image {h}x{w} too small (need at least 3x3)")]
    TooSmall { h: usize, w: usize },
    #[error("GLCM needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("GLCM offset must be nonzero")]
    ZeroOffset,
    #[error("offset ({0},{1}) leaves no valid pixel pairs")]
    NoPairs(i32, i32),
    #[error("expected a single-channel image, got {0} channels")]
    NotGrayscale(usize),
}

/// Interior LBP codes, (H−2)×(W−2), values 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbpMap {
    pub height: usize,
    pub width: usize,
    pub codes: Vec<u8>,
}

impl LbpMap {
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.codes[y * self.width + x]
    }
}

/// Normalized co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    pub offset: (i32, i32),
    /// Row-major L×L probabilities.
    pub probs: Vec<f64>,
}

impl Glcm {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }
}

/// Haralick subset computed from one GLCM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmStats {
    pub contrast: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub correlation: f64,
}

/// Combined texture descriptor: 256-bin LBP histogram plus per-offset
/// GLCM statistics.
#[derive(Debug, Clone)]
pub struct TextureFeature {
    pub lbp_histogram: [f64; 256],
    pub glcm_stats: Vec<GlcmStats>,
}

/// Neighbor offsets in bit order p = 0..7, clockwise from top-left.
const LBP_NEIGHBORS: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

pub fn lbp(img: &ImageTensor) -> Result<LbpMap, TextureError> {
    if img.channels() != 1 {
        return Err(TextureError::NotGrayscale(img.channels()));
    }
    let (h, w) = (img.height(), img.width());
    if h < 3 || w < 3 {
        return Err(TextureError::TooSmall { h, w });
    }
    let mut codes = Vec::with_capacity((h - 2) * (w - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = img.at(y, x);
            let mut code = 0u8;
            for (p, &(dy, dx)) in LBP_NEIGHBORS.iter().enumerate() {
                let n = img.at((y as i32 + dy) as usize, (x as i32 + dx) as usize);
                if n - center >= 0.0 {
                    code |= 1 << p;
                }
            }
            codes.push(code);
        }
    }
    Ok(LbpMap { height: h - 2, width: w - 2, codes })
}

/// Quantize to `⌊v·L⌋` clamped to L−1.
#[inline]
fn quantize(v: f64, levels: usize) -> usize {
    ((v * levels as f64) as usize).min(levels - 1)
}

pub fn glcm(
    img: &ImageTensor,
    levels: usize,
    offset: (i32, i32),
    symmetric: bool,
) -> Result<Glcm, TextureError> {
    if img.channels() != 1 {
        return Err(TextureError::NotGrayscale(img.channels()));
    }
    if levels < 2 {
        return Err(TextureError::TooFewLevels(levels));
    }
    if offset == (0, 0) {
        return Err(TextureError::ZeroOffset);
    }
    let (h, w) = (img.height() as i32, img.width() as i32);
    let (dy, dx) = offset;
    let mut counts = vec![0.0f64; levels * levels];
    let mut total = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (py, px) = (y + dy, x + dx);
            if py < 0 || py >= h || px < 0 || px >= w {
                continue;
            }
            let a = quantize(img.at(y as usize, x as usize), levels);
            let b = quantize(img.at(py as usize, px as usize), levels);
            counts[a * levels + b] += 1.0;
            total += 1.0;
            if symmetric {
                counts[b * levels + a] += 1.0;
                total += 1.0;
            }
        }
    }
    if total == 0.0 {
        return Err(TextureError::NoPairs(dy, dx));
    }
    for c in &mut counts {
        *c /= total;
    }
    Ok(Glcm { levels, offset, probs: counts })
}

pub fn glcm_stats(m: &Glcm) -> GlcmStats {
    let l = m.levels;
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut homogeneity = 0.0;
    let mut mu_i = 0.0;
    let mut mu_j = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = m.at(i, j);
            let d = i as f64 - j as f64;
            contrast += p * d * d;
            energy += p * p;
            homogeneity += p / (1.0 + d.abs());
            mu_i += i as f64 * p;
            mu_j += j as f64 * p;
        }
    }
    let mut var_i = 0.0;
    let mut var_j = 0.0;
    let mut cov = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = m.at(i, j);
            var_i += (i as f64 - mu_i) * (i as f64 - mu_i) * p;
            var_j += (j as f64 - mu_j) * (j as f64 - mu_j) * p;
            cov += (i as f64 - mu_i) * (j as f64 - mu_j) * p;
        }
    }
    // Zero variance means a degenerate (constant-level) matrix; the
    // correlation sum is 0/0 there, pinned to 0.
    let correlation = if var_i <= 0.0 || var_j <= 0.0 {
        0.0
    } else {
        cov / (var_i.sqrt() * var_j.sqrt())
    };
    GlcmStats { contrast, energy, homogeneity, correlation }
}

/// GLCM offsets used by the combined descriptor.
pub const TEXT_OFFSETS: [(i32, i32); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];
pub const TEXT_LEVELS: usize = 8;

/// Normalized LBP histogram plus symmetric L=8 GLCM statistics at the
/// four standard offsets.
pub fn text_features(img: &ImageTensor) -> Result<TextureFeature, TextureError> {
    let map = lbp(img)?;
    let mut lbp_histogram = [0.0f64; 256];
    for &code in &map.codes {
        lbp_histogram[code as usize] += 1.0;
    }
    let n = map.codes.len() as f64;
    for b in &mut lbp_histogram {
        *b /= n;
    }
    let glcm_stats = TEXT_OFFSETS
        .iter()
        .map(|&off| Ok(glcm_stats(&glcm(img, TEXT_LEVELS, off, true)?)))
        .collect::<Result<Vec<_>, TextureError>>()?;
    Ok(TextureFeature { lbp_histogram, glcm_stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lbp_constant_image_all_255() {
        let img = ImageTensor::filled(5, 5, 1, 0.5);
        let map = lbp(&img).unwrap();
        assert!(map.codes.iter().all(|&c| c == 255));
    }

    #[test]
    fn lbp_dominant_center_is_zero() {
        let mut img = ImageTensor::filled(3, 3, 1, 0.2);
        img.set(1, 1, 0, 0.9);
        assert_eq!(lbp(&img).unwrap().codes, vec![0]);
    }

    #[test]
    fn lbp_hand_evaluated_code() {
        // 3x3 values 0.1..0.9 row-major; center 0.5.
        // Neighbors in bit order: 0.1, 0.2, 0.3, 0.6, 0.9, 0.8, 0.7, 0.4
        // -> s: 0,0,0,1,1,1,1,0 -> code 0b01111000 = 120.
        let vals = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let img = ImageTensor::new(3, 3, 1, vals.to_vec()).unwrap();
        assert_eq!(lbp(&img).unwrap().codes, vec![120]);
    }

    #[test]
    fn lbp_too_small_rejected() {
        let img = ImageTensor::filled(2, 3, 1, 0.5);
        assert!(matches!(lbp(&img), Err(TextureError::TooSmall { .. })));
    }

    #[test]
    fn glcm_hand_counted() {
        let img = ImageTensor::new(2, 2, 1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = glcm(&img, 2, (0, 1), false).unwrap();
        assert_eq!(m.probs, vec![0.5, 0.0, 0.0, 0.5]);
        let s = glcm_stats(&m);
        assert_eq!(s.contrast, 0.0);
        assert_eq!(s.energy, 0.5);
        assert_eq!(s.homogeneity, 1.0);
        assert!((s.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glcm_constant_image_single_cell() {
        let img = ImageTensor::filled(4, 4, 1, 0.3);
        let m = glcm(&img, 8, (1, 1), true).unwrap();
        let lvl = (0.3f64 * 8.0) as usize;
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == lvl && j == lvl { 1.0 } else { 0.0 };
                assert_eq!(m.at(i, j), expect);
            }
        }
        let s = glcm_stats(&m);
        assert_eq!((s.contrast, s.energy, s.homogeneity, s.correlation), (0.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn glcm_invalid_inputs() {
        let img = ImageTensor::filled(3, 3, 1, 0.5);
        assert!(matches!(glcm(&img, 1, (0, 1), false), Err(TextureError::TooFewLevels(1))));
        assert!(matches!(glcm(&img, 8, (0, 0), false), Err(TextureError::ZeroOffset)));
        assert!(matches!(glcm(&img, 8, (5, 0), false), Err(TextureError::NoPairs(5, 0))));
    }

    #[test]
    fn uniform_glcm_energy() {
        let l = 4;
        let m = Glcm {
            levels: l,
            offset: (0, 1),
            probs: vec![1.0 / (l * l) as f64; l * l],
        };
        assert!((glcm_stats(&m).energy - 1.0 / (l * l) as f64).abs() < 1e-12);
    }

    #[test]
    fn text_features_constant_image() {
        let img = ImageTensor::filled(6, 6, 1, 0.4);
        let f = text_features(&img).unwrap();
        assert_eq!(f.lbp_histogram[255], 1.0);
        assert_eq!(f.lbp_histogram[..255].iter().sum::<f64>(), 0.0);
        for s in &f.glcm_stats {
            assert_eq!(s.contrast, 0.0);
        }
    }

    #[test]
    fn checkerboard_lbp_two_codes() {
        // 0/1 checkerboard: interior neighborhoods come in two phase
        // classes. Center 1: all 4-neighbors 0 (s=0), diagonals 1 (s=1)
        // -> bits at p ∈ {0,2,4,6} -> 0b01010101 = 85.
        // Center 0: every neighbor >= 0 -> ties/wins everywhere -> 255.
        let mut img = ImageTensor::filled(6, 6, 1, 0.0);
        for y in 0..6 {
            for x in 0..6 {
                if (y + x) % 2 == 0 {
                    img.set(y, x, 0, 1.0);
                }
            }
        }
        let f = text_features(&img).unwrap();
        let support: Vec<usize> =
            (0..256).filter(|&i| f.lbp_histogram[i] > 0.0).collect();
        assert_eq!(support, vec![85, 255]);
    }

    proptest! {
        #[test]
        fn histogram_sums_to_one_and_symmetric_glcm(seed in any::<u64>()) {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let img = ImageTensor::new(
                8, 8, 1, (0..64).map(|_| rng.next_f64()).collect()
            ).unwrap();
            let f = text_features(&img).unwrap();
            prop_assert!((f.lbp_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let m = glcm(&img, 8, (0, 1), true).unwrap();
            prop_assert!((m.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert_eq!(m.at(i, j), m.at(j, i));
                }
            }
        }

        #[test]
        fn lbp_invariant_under_monotone_transform(seed in any::<u64>()) {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let data: Vec<f64> = (0..36).map(|_| rng.next_f64()).collect();
            let img = ImageTensor::new(6, 6, 1, data.clone()).unwrap();
            // v -> v^3 is strictly increasing on [0,1].
            let cubed = ImageTensor::new(
                6, 6, 1, data.iter().map(|v| v.powi(3)).collect()
            ).unwrap();
            prop_assert_eq!(lbp(&img).unwrap(), lbp(&cubed).unwrap());
        }
    }
}
