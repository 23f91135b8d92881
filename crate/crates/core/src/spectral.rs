//! 2D DFT, high-pass masking, and phase-only reconstruction (the Hifr
//! stream).
//!
//! Conventions: forward transform is unnormalized,
//! `F(u,v) = Σ_x Σ_y f(x,y)·exp(−2πi(ux/H + vy/W))`; the inverse carries
//! the 1/(H·W) factor so the round trip is the identity. The high-pass
//! mask zeroes every bin within Euclidean distance `r` of the
//! zero-frequency bin in centered coordinates; `r = 0` removes exactly DC.

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::imagecore::{ImageError, ImageTensor};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("high-pass radius {r} out of bounds for {h}x{w} spectrum")]
    RadiusOutOfBounds { r: usize, h: usize, w: usize },
    #[error("expected a single-channel image, got {0} channels")]
    NotGrayscale(usize),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Row-major complex spectrum F(u, v).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Complex64 {
        self.data[u * self.width + v]
    }
}

/// Radius of the centered disk of bins suppressed by the high-pass mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HighPassSpec {
    pub radius: usize,
}

fn fft_2d(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut col = vec![Complex64::default(); height];
    for v in 0..width {
        for u in 0..height {
            col[u] = data[u * width + v];
        }
        col_fft.process(&mut col);
        for u in 0..height {
            data[u * width + v] = col[u];
        }
    }
}

/// Unnormalized forward 2D DFT of a single-channel image.
pub fn dft2(img: &ImageTensor) -> Result<Spectrum, SpectralError> {
    if img.channels() != 1 {
        return Err(SpectralError::NotGrayscale(img.channels()));
    }
    let (h, w) = (img.height(), img.width());
    let mut data: Vec<Complex64> =
        img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, h, w, false);
    Ok(Spectrum { height: h, width: w, data })
}

/// Inverse 2D DFT with 1/(H·W) normalization. Returns the full complex
/// field; callers take the real part when they expect a real image.
pub fn idft2(spec: &Spectrum) -> Vec<Complex64> {
    let (h, w) = (spec.height, spec.width);
    let mut data = spec.data.clone();
    fft_2d(&mut data, h, w, true);
    let norm = 1.0 / (h * w) as f64;
    for v in &mut data {
        *v *= norm;
    }
    data
}

/// Centered-coordinate distance of bin (u, v) from the zero-frequency bin.
fn centered_distance(u: usize, v: usize, h: usize, w: usize) -> f64 {
    let du = u.min(h - u) as f64;
    let dv = v.min(w - v) as f64;
    (du * du + dv * dv).sqrt()
}

/// Zeroes every bin within distance `r` of DC; passes all others
/// untouched.
pub fn high_pass(spec: &Spectrum, hp: HighPassSpec) -> Result<Spectrum, SpectralError> {
    let (h, w) = (spec.height, spec.width);
    if hp.radius > h.min(w) / 2 {
        return Err(SpectralError::RadiusOutOfBounds { r: hp.radius, h, w });
    }
    let mut out = spec.clone();
    let r = hp.radius as f64;
    for u in 0..h {
        for v in 0..w {
            if centered_distance(u, v, h, w) <= r {
                out.data[u * w + v] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// Phase-only spectrum of a high-passed transform: unit magnitude where
/// the filtered bin is nonzero, zero where it is exactly zero (arg is
/// undefined there and must not inject energy).
pub fn phase_spectrum(filtered: &Spectrum) -> Spectrum {
    let data = filtered
        .data
        .iter()
        .map(|&z| {
            if z == Complex64::new(0.0, 0.0) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, z.arg())
            }
        })
        .collect();
    Spectrum { height: filtered.height, width: filtered.width, data }
}

/// High-pass, keep only phase, invert, take the real part, min-max
/// normalize to [0,1]. A degenerate (constant) reconstruction maps to an
/// all-zero image.
pub fn phase_reconstruct(
    img: &ImageTensor,
    hp: HighPassSpec,
) -> Result<ImageTensor, SpectralError> {
    let spec = dft2(img)?;
    let mut filtered = high_pass(&spec, hp)?;
    // Bins that are pure transform rounding noise must not be promoted
    // to unit magnitude; a constant image keeps an all-zero spectrum.
    let peak = spec.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * peak;
    for z in &mut filtered.data {
        if z.norm() <= tol {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let phase = phase_spectrum(&filtered);
    let g = idft2(&phase);
    let real: Vec<f64> = g.iter().map(|z| z.re).collect();
    let lo = real.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = real.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let data: Vec<f64> = if range <= 0.0 {
        vec![0.0; real.len()]
    } else {
        real.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    };
    Ok(ImageTensor::new(img.height(), img.width(), 1, data)?)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Naive O(N²) direct-summation transforms.
    use super::*;

    pub fn dft2_naive(img: &ImageTensor) -> Spectrum {
        let (h, w) = (img.height(), img.width());
        let mut data = vec![Complex64::default(); h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..h {
                    for y in 0..w {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * (u as f64 * x as f64 / h as f64
                                + v as f64 * y as f64 / w as f64);
                        acc += img.at(x, y) * Complex64::from_polar(1.0, ang);
                    }
                }
                data[u * w + v] = acc;
            }
        }
        Spectrum { height: h, width: w, data }
    }

    pub fn idft2_naive(spec: &Spectrum) -> Vec<Complex64> {
        let (h, w) = (spec.height, spec.width);
        let mut out = vec![Complex64::default(); h * w];
        for x in 0..h {
            for y in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for u in 0..h {
                    for v in 0..w {
                        let ang = 2.0
                            * std::f64::consts::PI
                            * (u as f64 * x as f64 / h as f64
                                + v as f64 * y as f64 / w as f64);
                        acc += spec.at(u, v) * Complex64::from_polar(1.0, ang);
                    }
                }
                out[x * w + y] = acc / (h * w) as f64;
            }
        }
        out
    }

    pub fn random_image(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = crate::rng::Xoshiro256PlusPlus::new(seed);
        ImageTensor::new(h, w, 1, (0..h * w).map(|_| rng.next_f64()).collect()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracle::*;

    #[test]
    fn delta_image_flat_spectrum() {
        let mut img = ImageTensor::filled(4, 4, 1, 0.0);
        img.set(0, 0, 0, 1.0);
        let spec = dft2(&img).unwrap();
        for z in &spec.data {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_image_pure_dc() {
        let img = ImageTensor::filled(4, 6, 1, 0.5);
        let spec = dft2(&img).unwrap();
        assert!((spec.at(0, 0) - Complex64::new(0.5 * 24.0, 0.0)).norm() < 1e-9);
        for u in 0..4 {
            for v in 0..6 {
                if (u, v) != (0, 0) {
                    assert!(spec.at(u, v).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dft_matches_naive_oracle() {
        for seed in 0..5 {
            let img = random_image(4, 4, seed);
            let fast = dft2(&img).unwrap();
            let slow = dft2_naive(&img);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn idft_round_trip_and_oracle() {
        let img = random_image(5, 7, 9);
        let back = idft2(&dft2(&img).unwrap());
        for (z, &v) in back.iter().zip(img.data()) {
            assert!((z.re - v).abs() < 1e-9 && z.im.abs() < 1e-9);
        }
        // Random spectrum against the naive inverse.
        let mut rng = crate::rng::Xoshiro256PlusPlus::new(13);
        let spec = Spectrum {
            height: 4,
            width: 4,
            data: (0..16)
                .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
                .collect(),
        };
        let fast = idft2(&spec);
        let slow = idft2_naive(&spec);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn all_ones_spectrum_is_delta() {
        let spec = Spectrum {
            height: 4,
            width: 4,
            data: vec![Complex64::new(1.0, 0.0); 16],
        };
        let img = idft2(&spec);
        assert!((img[0].re - 1.0).abs() < 1e-12);
        for z in &img[1..] {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn high_pass_r0_removes_only_dc() {
        let img = random_image(6, 6, 21);
        let spec = dft2(&img).unwrap();
        let hp = high_pass(&spec, HighPassSpec { radius: 0 }).unwrap();
        assert_eq!(hp.at(0, 0), Complex64::new(0.0, 0.0));
        for u in 0..6 {
            for v in 0..6 {
                if (u, v) != (0, 0) {
                    assert_eq!(hp.at(u, v), spec.at(u, v));
                }
            }
        }
    }

    #[test]
    fn constant_through_r0_reconstructs_to_zero_signal() {
        let img = ImageTensor::filled(8, 8, 1, 0.7);
        let hp = high_pass(&dft2(&img).unwrap(), HighPassSpec { radius: 0 }).unwrap();
        for z in idft2(&hp) {
            assert!(z.norm() < 1e-9);
        }
    }

    #[test]
    fn high_pass_matches_distance_mask_oracle() {
        let img = random_image(8, 8, 33);
        let spec = dft2(&img).unwrap();
        let r = 4;
        let hp = high_pass(&spec, HighPassSpec { radius: r }).unwrap();
        for u in 0..8usize {
            for v in 0..8usize {
                let du = u.min(8 - u) as f64;
                let dv = v.min(8 - v) as f64;
                let suppressed = (du * du + dv * dv).sqrt() <= r as f64;
                if suppressed {
                    assert_eq!(hp.at(u, v), Complex64::new(0.0, 0.0));
                } else {
                    assert_eq!(hp.at(u, v), spec.at(u, v));
                }
            }
        }
        assert!(high_pass(&spec, HighPassSpec { radius: 5 }).is_err());
    }

    #[test]
    fn phase_spectrum_unit_or_zero_magnitude() {
        let img = random_image(8, 8, 5);
        let filtered = high_pass(&dft2(&img).unwrap(), HighPassSpec { radius: 2 }).unwrap();
        let phase = phase_spectrum(&filtered);
        for (p, f) in phase.data.iter().zip(&filtered.data) {
            if *f == Complex64::new(0.0, 0.0) {
                assert_eq!(*p, Complex64::new(0.0, 0.0));
            } else {
                assert!((p.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_on_phase_only_signal() {
        let img = random_image(8, 8, 6);
        let filtered = high_pass(&dft2(&img).unwrap(), HighPassSpec { radius: 1 }).unwrap();
        let phase = phase_spectrum(&filtered);
        let nonzero = phase
            .data
            .iter()
            .filter(|z| **z != Complex64::new(0.0, 0.0))
            .count() as f64;
        let g = idft2(&phase);
        let energy: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        assert!((energy - nonzero / 64.0).abs() < 1e-9);
    }

    #[test]
    fn phase_reconstruct_bounded_and_finite() {
        for seed in [1, 2, 3] {
            let img = random_image(9, 11, seed);
            let out = phase_reconstruct(&img, HighPassSpec { radius: 1 }).unwrap();
            assert!(out.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
        // Constant image degenerates to the all-zero map.
        let flat = ImageTensor::filled(6, 6, 1, 0.4);
        let out = phase_reconstruct(&flat, HighPassSpec { radius: 0 }).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn passthrough_filter_composes_with_verified_transforms() {
        // Delta image, no filtering: the phase-only spectrum equals the
        // unit spectrum, so the reconstruction is the delta again.
        let mut img = ImageTensor::filled(4, 4, 1, 0.0);
        img.set(0, 0, 0, 1.0);
        let spec = dft2_naive(&img);
        let phase = phase_spectrum(&spec);
        let g = idft2_naive(&phase);
        assert!((g[0].re - 1.0).abs() < 1e-9);
        for z in &g[1..] {
            assert!(z.norm() < 1e-9);
        }
    }
}
