//! Image representation, grayscale conversion, and bit-exact PNM I/O.
//!
//! Pixels live in `[0, 1]` as `f64` internally; 8-bit quantization happens
//! only at the PNM boundary (`value = byte / 255`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("expected a single-channel image, got {0} channels")]
    NotGrayscale(usize),
    #[error("pixel data length {got} does not match {h}x{w}x{c}")]
    BadDataLength { h: usize, w: usize, c: usize, got: usize },
    #[error("pixel value {0} outside [0,1] or not finite")]
    BadPixelValue(f64),
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("threshold {0} outside [0,1]")]
    BadThreshold(f64),
    #[error("malformed PNM header: {0}")]
    BadHeader(String),
    #[error("unsupported PNM maxval {0} (only 255)")]
    BadMaxval(u32),
    #[error("truncated PNM payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("structuring element must be non-empty with unique offsets")]
    BadElement,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// H×W×C raster with row-major `f64` samples in [0,1]. C is 1 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::UnsupportedChannels(channels));
        }
        if data.len() != height * width * channels {
            return Err(ImageError::BadDataLength {
                h: height,
                w: width,
                c: channels,
                got: data.len(),
            });
        }
        if let Some(&v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(ImageError::BadPixelValue(v));
        }
        Ok(Self { height, width, channels, data })
    }

    /// Constant-valued image.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("filled image is valid by construction")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Single-channel accessor; panics if C != 1.
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f64 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }
}

/// Foreground/background mask. Foreground pixels form the set A of the
/// morphological operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage);
        }
        if data.len() != height * width {
            return Err(ImageError::BadDataLength { h: height, w: width, c: 1, got: data.len() });
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("valid by construction")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }
}

/// Set of (dy, dx) probe offsets relative to the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    pub fn new(offsets: Vec<(i32, i32)>) -> Result<Self, ImageError> {
        if offsets.is_empty() {
            return Err(ImageError::BadElement);
        }
        let mut seen = offsets.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != offsets.len() {
            return Err(ImageError::BadElement);
        }
        Ok(Self { offsets })
    }

    /// Full 3×3 square with centered origin.
    pub fn square3() -> Self {
        let mut offsets = Vec::with_capacity(9);
        for dy in -1..=1 {
            for dx in -1..=1 {
                offsets.push((dy, dx));
            }
        }
        Self { offsets }
    }

    /// 4-connected cross with centered origin.
    pub fn cross() -> Self {
        Self { offsets: vec![(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] }
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// Reflection about the origin (offsets negated).
    pub fn reflected(&self) -> Self {
        Self { offsets: self.offsets.iter().map(|&(dy, dx)| (-dy, -dx)).collect() }
    }
}

/// BT.601 luma conversion. Identity on single-channel input.
pub fn to_grayscale(img: &ImageTensor) -> Result<ImageTensor, ImageError> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let (h, w) = (img.height(), img.width());
            let mut data = Vec::with_capacity(h * w);
            for px in img.data().chunks_exact(3) {
                // R and B weights are grouped first; this summation order
                // makes unit white map to exactly 1.0.
                let v = (0.299 * px[0] + 0.114 * px[2]) + 0.587 * px[1];
                data.push(v.clamp(0.0, 1.0));
            }
            ImageTensor::new(h, w, 1, data)
        }
        c => Err(ImageError::UnsupportedChannels(c)),
    }
}

/// Foreground iff pixel >= t.
pub fn threshold(img: &ImageTensor, t: f64) -> Result<BinaryImage, ImageError> {
    if img.channels() != 1 {
        return Err(ImageError::NotGrayscale(img.channels()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(ImageError::BadThreshold(t));
    }
    BinaryImage::new(
        img.height(),
        img.width(),
        img.data().iter().map(|&v| v >= t).collect(),
    )
}

fn read_header_token(r: &mut impl Read) -> Result<String, ImageError> {
    // Tokens are separated by whitespace; '#' starts a comment running to
    // end of line.
    let mut tok = String::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        let n = r.read(&mut byte)?;
        if n == 0 {
            if tok.is_empty() {
                return Err(ImageError::BadHeader("unexpected end of header".into()));
            }
            return Ok(tok);
        }
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        match b {
            b'#' => {
                if !tok.is_empty() {
                    return Ok(tok);
                }
                in_comment = true;
            }
            b' ' | b'\t' | b'\r' | b'\n' => {
                if !tok.is_empty() {
                    return Ok(tok);
                }
            }
            _ => tok.push(b as char),
        }
    }
}

/// Reads a binary PGM (P5) or PPM (P6) with maxval 255.
pub fn read_pnm(path: impl AsRef<Path>) -> Result<ImageTensor, ImageError> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_header_token(&mut r)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(ImageError::BadHeader(format!("bad magic {other:?}"))),
    };
    let parse = |tok: String| {
        tok.parse::<usize>()
            .map_err(|_| ImageError::BadHeader(format!("bad integer {tok:?}")))
    };
    let width = parse(read_header_token(&mut r)?)?;
    let height = parse(read_header_token(&mut r)?)?;
    let maxval = parse(read_header_token(&mut r)?)?;
    if maxval != 255 {
        return Err(ImageError::BadMaxval(maxval as u32));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::EmptyImage);
    }
    let expected = height * width * channels;
    let mut payload = vec![0u8; expected];
    let mut got = 0;
    while got < expected {
        let n = r.read(&mut payload[got..])?;
        if n == 0 {
            return Err(ImageError::Truncated { expected, got });
        }
        got += n;
    }
    let data = payload.iter().map(|&b| b as f64 / 255.0).collect();
    ImageTensor::new(height, width, channels, data)
}

/// Writes PGM for C=1, PPM for C=3. Values are quantized by
/// `round(v * 255)`.
pub fn write_pnm(img: &ImageTensor, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let mut w = BufWriter::new(File::create(path)?);
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(ImageError::UnsupportedChannels(c)),
    };
    write!(w, "{}\n{} {}\n255\n", magic, img.width(), img.height())?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_white_is_one() {
        let img = ImageTensor::filled(2, 2, 3, 1.0);
        let g = to_grayscale(&img).unwrap();
        for &v in g.data() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn grayscale_identity_on_single_channel() {
        let img = ImageTensor::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(to_grayscale(&img).unwrap(), img);
    }

    #[test]
    fn grayscale_pure_red() {
        let img = ImageTensor::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let g = to_grayscale(&img).unwrap();
        assert!((g.at(0, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn threshold_conventions() {
        let img = ImageTensor::filled(3, 3, 1, 0.6);
        assert!(threshold(&img, 0.5).unwrap().data().iter().all(|&b| b));
        // >= convention: equality is foreground.
        assert!(threshold(&img, 0.6).unwrap().data().iter().all(|&b| b));
        assert!(threshold(&img, 0.0).unwrap().data().iter().all(|&b| b));
    }

    #[test]
    fn threshold_matches_elementwise_oracle() {
        let mut rng = crate::rng::Xoshiro256PlusPlus::new(11);
        let data: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let img = ImageTensor::new(8, 8, 1, data.clone()).unwrap();
        let t = 0.37;
        let out = threshold(&img, t).unwrap();
        for (i, &v) in data.iter().enumerate() {
            assert_eq!(out.data()[i], v >= t);
        }
    }

    #[test]
    fn pnm_header_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, {
            let mut v = b"P5 2 2 255\n".to_vec();
            v.extend_from_slice(&[0, 255, 128, 64]);
            v
        })
        .unwrap();
        let img = read_pnm(&path).unwrap();
        assert_eq!(
            img.data(),
            &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]
        );
    }

    #[test]
    fn pnm_comment_in_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        std::fs::write(&path, {
            let mut v = b"P5\n# a comment\n1 1\n255\n".to_vec();
            v.push(42);
            v
        })
        .unwrap();
        let img = read_pnm(&path).unwrap();
        assert_eq!(img.data(), &[42.0 / 255.0]);
    }

    #[test]
    fn pnm_truncated_payload_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, {
            let mut v = b"P5 2 2 255\n".to_vec();
            v.extend_from_slice(&[1, 2]);
            v
        })
        .unwrap();
        assert!(matches!(read_pnm(&path), Err(ImageError::Truncated { .. })));
    }

    #[test]
    fn pnm_bad_maxval_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        std::fs::write(&path, b"P5 1 1 65535\n\x00\x00").unwrap();
        assert!(matches!(read_pnm(&path), Err(ImageError::BadMaxval(65535))));
    }

    proptest! {
        #[test]
        fn pnm_roundtrip_byte_identical(
            h in 1usize..8, w in 1usize..8, rgb in any::<bool>(), seed in any::<u64>()
        ) {
            let c = if rgb { 3 } else { 1 };
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            // Byte-aligned values so the quantizer is exact.
            let data: Vec<f64> = (0..h * w * c)
                .map(|_| rng.next_below(256) as f64 / 255.0)
                .collect();
            let img = ImageTensor::new(h, w, c, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p1 = dir.path().join("a.pnm");
            let p2 = dir.path().join("b.pnm");
            write_pnm(&img, &p1).unwrap();
            let back = read_pnm(&p1).unwrap();
            write_pnm(&back, &p2).unwrap();
            prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
            prop_assert_eq!(back, img);
        }

        #[test]
        fn grayscale_bounded_by_channel_extrema(seed in any::<u64>()) {
            let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
            let data: Vec<f64> = (0..4 * 4 * 3).map(|_| rng.next_f64()).collect();
            let img = ImageTensor::new(4, 4, 3, data).unwrap();
            let g = to_grayscale(&img).unwrap();
            for y in 0..4 {
                for x in 0..4 {
                    let (r, gg, b) = (img.get(y, x, 0), img.get(y, x, 1), img.get(y, x, 2));
                    let lo = r.min(gg).min(b);
                    let hi = r.max(gg).max(b);
                    prop_assert!(g.at(y, x) >= lo - 1e-12 && g.at(y, x) <= hi + 1e-12);
                }
            }
        }
    }
}
