//! Map-to-vector pooling and per-frame feature bundling.
//!
//! Each extractor's map is reduced to per-cell (mean, population std)
//! statistics over a G×G floor-partitioned grid, so spatially local
//! artifacts such as splice boundaries survive the reduction. The five
//! pooled streams are deliberately NOT length-equalized; the network's
//! per-stream input projections absorb the width differences.

use thiserror::Error;

use crate::compression::{self, CompressionError, QuantSpec};
use crate::imagecore::{ImageError, ImageTensor};
use crate::morphology;
use crate::photometry::{self, PhotometryError};
use crate::spectral::{self, HighPassSpec, SpectralError};
use crate::texture::{self, TextureError, TEXT_OFFSETS};

#[derive(Debug, Error)]
pub enum PoolingError {
    #[error("pooling grid {g} out of range for {h}x{w} map")]
    GridOutOfRange { g: usize, h: usize, w: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Photometry(#[from] PhotometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error(transparent)]
    Texture(#[from] TextureError),
}

/// The five forensic feature streams, in the fixed serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Text,
    Comr,
    Hifr,
    Lico,
    Moop,
}

impl Stream {
    pub const ALL: [Stream; 5] = [Stream::Text, Stream::Comr, Stream::Hifr, Stream::Lico, Stream::Moop];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Text => "text",
            Stream::Comr => "comr",
            Stream::Hifr => "hifr",
            Stream::Lico => "lico",
            Stream::Moop => "moop",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Stream::Text => 0,
            Stream::Comr => 1,
            Stream::Hifr => 2,
            Stream::Lico => 3,
            Stream::Moop => 4,
        }
    }
}

/// One pooled stream vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub stream: Stream,
    pub values: Vec<f64>,
}

/// The five per-frame pooled vectors, keyed by stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    vectors: [FeatureVector; 5],
}

impl FeatureBundle {
    pub fn new(vectors: [FeatureVector; 5]) -> Self {
        for (i, v) in vectors.iter().enumerate() {
            assert_eq!(v.stream.index(), i, "vectors must be in stream order");
        }
        Self { vectors }
    }

    pub fn get(&self, stream: Stream) -> &FeatureVector {
        &self.vectors[stream.index()]
    }

    pub fn vectors(&self) -> &[FeatureVector; 5] {
        &self.vectors
    }

    /// Per-stream vector lengths in stream order.
    pub fn dims(&self) -> [usize; 5] {
        let mut d = [0; 5];
        for (i, v) in self.vectors.iter().enumerate() {
            d[i] = v.values.len();
        }
        d
    }
}

/// Extractor configuration shared by every frame of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    /// Pooling / Lico grid size.
    pub grid: usize,
    /// Compression round-trip quality.
    pub quality: u32,
    /// High-pass radius; `None` selects ⌊min(H,W)/8⌋ per frame.
    pub hp_radius: Option<usize>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { grid: 4, quality: 50, hp_radius: None }
    }
}

impl ExtractConfig {
    /// Expected stream dims for C-channel frames under this config.
    pub fn stream_dims(&self, channels: usize) -> [usize; 5] {
        let g2 = self.grid * self.grid;
        [
            256 + 4 * TEXT_OFFSETS.len(), // text: histogram + 4 stats per offset
            2 * g2,                       // comr
            2 * g2,                       // hifr
            channels + g2 * channels,     // lico
            4 * g2,                       // moop: gradient + opening residual
        ]
    }
}

/// Per-cell (mean, population std) over a G×G floor partition, row-major
/// cells. Output length 2·G².
pub fn pool_map(map: &ImageTensor, grid: usize) -> Result<Vec<f64>, PoolingError> {
    assert_eq!(map.channels(), 1, "pool_map needs C=1");
    let (h, w) = (map.height(), map.width());
    if grid < 1 || grid > h.min(w) {
        return Err(PoolingError::GridOutOfRange { g: grid, h, w });
    }
    let mut out = Vec::with_capacity(2 * grid * grid);
    for i in 0..grid {
        let (y0, y1) = (i * h / grid, (i + 1) * h / grid);
        for j in 0..grid {
            let (x0, x1) = (j * w / grid, (j + 1) * w / grid);
            // Constant cells must pool to exactly (c, 0); summation
            // rounding would otherwise leave ~1e-17 artifacts.
            let first = map.at(y0, x0);
            if (y0..y1).all(|y| (x0..x1).all(|x| map.at(y, x) == first)) {
                out.push(first);
                out.push(0.0);
                continue;
            }
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += map.at(y, x);
                }
            }
            let mean = sum / n;
            let mut var = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = map.at(y, x) - mean;
                    var += d * d;
                }
            }
            out.push(mean);
            out.push((var / n).sqrt());
        }
    }
    Ok(out)
}

/// Runs all five extractors on one frame and pools the maps.
pub fn extract_bundle(img: &ImageTensor, cfg: &ExtractConfig) -> Result<FeatureBundle, PoolingError> {
    let g = cfg.grid;

    // Text
    let gray = crate::imagecore::to_grayscale(img)?;
    let tf = texture::text_features(&gray)?;
    let mut text = tf.lbp_histogram.to_vec();
    for s in &tf.glcm_stats {
        text.extend_from_slice(&[s.contrast, s.energy, s.homogeneity, s.correlation]);
    }

    // Comr
    let quant = QuantSpec::from_quality(cfg.quality)?;
    let residual = compression::comr_features(img, &quant)?;
    let comr = pool_map(&residual, g)?;

    // Hifr
    let radius = cfg
        .hp_radius
        .unwrap_or_else(|| img.height().min(img.width()) / 8);
    let phase = spectral::phase_reconstruct(&gray, HighPassSpec { radius })?;
    let hifr = pool_map(&phase, g)?;

    // Lico
    let lf = photometry::lico_features(img, g)?;
    let mut lico = lf.global_variance.clone();
    for row in &lf.block_variances {
        for cell in row {
            lico.extend_from_slice(cell);
        }
    }

    // Moop
    let maps = morphology::moop_features(img)?;
    let mut moop = pool_map(&maps.gradient, g)?;
    moop.extend(pool_map(&maps.opening_residual, g)?);

    Ok(FeatureBundle::new([
        FeatureVector { stream: Stream::Text, values: text },
        FeatureVector { stream: Stream::Comr, values: comr },
        FeatureVector { stream: Stream::Hifr, values: hifr },
        FeatureVector { stream: Stream::Lico, values: lico },
        FeatureVector { stream: Stream::Moop, values: moop },
    ]))
}
