//! Lighting-consistency scoring (the Lico stream).
//!
//! The score for a channel is the population variance of its intensities;
//! high dispersion marks inconsistent lighting. The block-wise variant
//! partitions the image into a G×G grid and scores each cell, so a splice
//! lit differently from its surroundings shows up as cross-cell disparity.

use thiserror::Error;

use crate::imagecore::ImageTensor;

#[derive(Debug, Error)]
pub enum PhotometryError {
    #[error("channel {0} out of range for a {1}-channel image")]
    ChannelOutOfRange(usize, usize),
    #[error("grid size {g} out of range for a {h}x{w} image")]
    GridOutOfRange { g: usize, h: usize, w: usize },
}

/// Global and block-wise per-channel variances.
#[derive(Debug, Clone)]
pub struct LightingFeature {
    /// One variance per channel.
    pub global_variance: Vec<f64>,
    /// `block_variances[cell_row][cell_col][channel]`.
    pub block_variances: Vec<Vec<Vec<f64>>>,
    pub grid: usize,
}

/// Mean intensity of one channel over all pixels.
pub fn channel_mean(img: &ImageTensor, c: usize) -> Result<f64, PhotometryError> {
    if c >= img.channels() {
        return Err(PhotometryError::ChannelOutOfRange(c, img.channels()));
    }
    Ok(region_mean(img, c, 0, img.height(), 0, img.width()))
}

/// Population variance of one channel (divisor H·W).
pub fn lighting_score(img: &ImageTensor, c: usize) -> Result<f64, PhotometryError> {
    if c >= img.channels() {
        return Err(PhotometryError::ChannelOutOfRange(c, img.channels()));
    }
    Ok(region_variance(img, c, 0, img.height(), 0, img.width()))
}

fn region_mean(img: &ImageTensor, c: usize, y0: usize, y1: usize, x0: usize, x1: usize) -> f64 {
    let mut sum = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            sum += img.get(y, x, c);
        }
    }
    sum / ((y1 - y0) * (x1 - x0)) as f64
}

fn region_variance(img: &ImageTensor, c: usize, y0: usize, y1: usize, x0: usize, x1: usize) -> f64 {
    // Constant regions must score exactly 0; the mean's rounding error
    // would otherwise leak in as a spurious ~1e-34 dispersion.
    let first = img.get(y0, x0, c);
    let constant = (y0..y1).all(|y| (x0..x1).all(|x| img.get(y, x, c) == first));
    if constant {
        return 0.0;
    }
    let mean = region_mean(img, c, y0, y1, x0, x1);
    let mut sum = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            let d = img.get(y, x, c) - mean;
            sum += d * d;
        }
    }
    sum / ((y1 - y0) * (x1 - x0)) as f64
}

/// Global plus G×G block-wise variances. Cell (i, j) spans rows
/// ⌊iH/G⌋..⌊(i+1)H/G⌋ and the analogous columns.
pub fn lico_features(img: &ImageTensor, grid: usize) -> Result<LightingFeature, PhotometryError> {
    let (h, w) = (img.height(), img.width());
    if grid < 1 || grid > h.min(w) {
        return Err(PhotometryError::GridOutOfRange { g: grid, h, w });
    }
    let global_variance: Vec<f64> = (0..img.channels())
        .map(|c| region_variance(img, c, 0, h, 0, w))
        .collect();
    let mut block_variances = Vec::with_capacity(grid);
    for i in 0..grid {
        let (y0, y1) = (i * h / grid, (i + 1) * h / grid);
        let mut row = Vec::with_capacity(grid);
        for j in 0..grid {
            let (x0, x1) = (j * w / grid, (j + 1) * w / grid);
            row.push(
                (0..img.channels())
                    .map(|c| region_variance(img, c, y0, y1, x0, x1))
                    .collect(),
            );
        }
        block_variances.push(row);
    }
    Ok(LightingFeature { global_variance, block_variances, grid })
}
