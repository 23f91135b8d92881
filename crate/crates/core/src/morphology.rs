//! Binary and grayscale morphology plus the Moop feature maps.
//!
//! Binary operators follow the set definitions: erosion keeps the points z
//! where every translated probe lands on foreground, dilation keeps the
//! points where the reflected probe intersects foreground. Out-of-bounds is
//! background for both, so erosion darkens borders. The grayscale layer
//! replaces containment/intersection with min/max over the flat element
//! and reduces to the binary layer on {0,1} images.

use crate::imagecore::{to_grayscale, BinaryImage, ImageError, ImageTensor, StructuringElement};

/// Evidence maps for the Moop stream: morphological gradient
/// (dilation − erosion) and opening residual (image − opening).
#[derive(Debug, Clone)]
pub struct MorphFeatureMap {
    pub gradient: ImageTensor,
    pub opening_residual: ImageTensor,
}

pub fn erode(a: &BinaryImage, b: &StructuringElement) -> BinaryImage {
    let (h, w) = (a.height() as i32, a.width() as i32);
    let mut out = BinaryImage::filled(a.height(), a.width(), false);
    for y in 0..h {
        for x in 0..w {
            let all_in = b.offsets().iter().all(|&(dy, dx)| {
                let (py, px) = (y + dy, x + dx);
                py >= 0 && py < h && px >= 0 && px < w && a.get(py as usize, px as usize)
            });
            out.set(y as usize, x as usize, all_in);
        }
    }
    out
}

pub fn dilate(a: &BinaryImage, b: &StructuringElement) -> BinaryImage {
    let (h, w) = (a.height() as i32, a.width() as i32);
    let refl = b.reflected();
    let mut out = BinaryImage::filled(a.height(), a.width(), false);
    for y in 0..h {
        for x in 0..w {
            let any_hit = refl.offsets().iter().any(|&(dy, dx)| {
                let (py, px) = (y + dy, x + dx);
                py >= 0 && py < h && px >= 0 && px < w && a.get(py as usize, px as usize)
            });
            out.set(y as usize, x as usize, any_hit);
        }
    }
    out
}

/// Erosion followed by dilation.
pub fn open(a: &BinaryImage, b: &StructuringElement) -> BinaryImage {
    dilate(&erode(a, b), b)
}

/// Dilation followed by erosion.
pub fn close(a: &BinaryImage, b: &StructuringElement) -> BinaryImage {
    erode(&dilate(a, b), b)
}

/// Grayscale erosion: min over the element support, out-of-bounds
/// contributing 0.
pub fn gray_erode(img: &ImageTensor, b: &StructuringElement) -> ImageTensor {
    gray_extremum(img, b.offsets(), true)
}

/// Grayscale dilation: max over the reflected element support,
/// out-of-bounds contributing 0.
pub fn gray_dilate(img: &ImageTensor, b: &StructuringElement) -> ImageTensor {
    gray_extremum(img, b.reflected().offsets(), false)
}

fn gray_extremum(img: &ImageTensor, offsets: &[(i32, i32)], take_min: bool) -> ImageTensor {
    assert_eq!(img.channels(), 1, "grayscale morphology needs C=1");
    let (h, w) = (img.height() as i32, img.width() as i32);
    let mut data = Vec::with_capacity((h * w) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut acc = if take_min { f64::INFINITY } else { f64::NEG_INFINITY };
            for &(dy, dx) in offsets {
                let (py, px) = (y + dy, x + dx);
                let v = if py >= 0 && py < h && px >= 0 && px < w {
                    img.at(py as usize, px as usize)
                } else {
                    0.0
                };
                acc = if take_min { acc.min(v) } else { acc.max(v) };
            }
            data.push(acc);
        }
    }
    ImageTensor::new(img.height(), img.width(), 1, data).expect("bounded by input range")
}

pub fn gray_open(img: &ImageTensor, b: &StructuringElement) -> ImageTensor {
    gray_dilate(&gray_erode(img, b), b)
}

/// Morphological evidence maps with the default full 3×3 element.
pub fn moop_features(img: &ImageTensor) -> Result<MorphFeatureMap, ImageError> {
    let gray = to_grayscale(img)?;
    let se = StructuringElement::square3();
    let dil = gray_dilate(&gray, &se);
    let ero = gray_erode(&gray, &se);
    let opened = gray_open(&gray, &se);
    let (h, w) = (gray.height(), gray.width());
    let gradient: Vec<f64> = dil
        .data()
        .iter()
        .zip(ero.data())
        .map(|(&d, &e)| (d - e).clamp(0.0, 1.0))
        .collect();
    let residual: Vec<f64> = gray
        .data()
        .iter()
        .zip(opened.data())
        .map(|(&v, &o)| (v - o).clamp(0.0, 1.0))
        .collect();
    Ok(MorphFeatureMap {
        gradient: ImageTensor::new(h, w, 1, gradient)?,
        opening_residual: ImageTensor::new(h, w, 1, residual)?,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn complement(a: &BinaryImage) -> BinaryImage {
        BinaryImage::new(a.height(), a.width(), a.data().iter().map(|&b| !b).collect()).unwrap()
    }

    #[test]
    fn erode_full_image_by_square3_keeps_center() {
        let a = BinaryImage::filled(3, 3, true);
        let e = erode(&a, &StructuringElement::square3());
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(e.get(y, x), y == 1 && x == 1);
            }
        }
    }

    #[test]
    fn erode_by_origin_is_identity() {
        let a = oracle::random_binary(6, 6, 3);
        let b = StructuringElement::new(vec![(0, 0)]).unwrap();
        assert_eq!(erode(&a, &b), a);
        assert_eq!(dilate(&a, &b), a);
    }

    #[test]
    fn dilate_single_pixel_square3() {
        let mut a = BinaryImage::filled(5, 5, false);
        a.set(2, 2, true);
        let d = dilate(&a, &StructuringElement::square3());
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&y) && (1..=3).contains(&x);
                assert_eq!(d.get(y, x), inside);
            }
        }
    }

    #[test]
    fn dilate_empty_is_empty() {
        let a = BinaryImage::filled(4, 4, false);
        assert_eq!(dilate(&a, &StructuringElement::square3()), a);
    }

    #[test]
    fn erode_dilate_match_set_oracles() {
        let b = StructuringElement::cross();
        for seed in 0..20 {
            let a = oracle::random_binary(8, 8, seed);
            assert_eq!(erode(&a, &b), oracle::erode_sets(&a, &b));
            assert_eq!(dilate(&a, &b), oracle::dilate_sets(&a, &b));
        }
    }

    #[test]
    fn open_removes_isolated_pixel() {
        let mut a = BinaryImage::filled(5, 5, false);
        a.set(2, 2, true);
        let o = open(&a, &StructuringElement::square3());
        assert!(o.data().iter().all(|&v| !v));
    }

    #[test]
    fn open_is_composition_and_idempotent() {
        let b = StructuringElement::cross();
        for seed in 0..10 {
            let a = oracle::random_binary(8, 8, seed);
            let o = open(&a, &b);
            assert_eq!(o, dilate(&erode(&a, &b), &b));
            assert_eq!(open(&o, &b), o);
            assert_eq!(close(&a, &b), erode(&dilate(&a, &b), &b));
        }
    }

    #[test]
    fn gray_ops_match_binary_on_01_images() {
        let b = StructuringElement::cross();
        for seed in 0..10 {
            let bin = oracle::random_binary(8, 8, seed + 100);
            let data: Vec<f64> =
                bin.data().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
            let img = ImageTensor::new(8, 8, 1, data).unwrap();
            let ge = crate::imagecore::threshold(&gray_erode(&img, &b), 0.5).unwrap();
            let gd = crate::imagecore::threshold(&gray_dilate(&img, &b), 0.5).unwrap();
            assert_eq!(ge, erode(&bin, &b));
            assert_eq!(gd, dilate(&bin, &b));
        }
    }

    #[test]
    fn gray_origin_identity_and_zero_image() {
        let origin = StructuringElement::new(vec![(0, 0)]).unwrap();
        let img = ImageTensor::filled(4, 4, 1, 0.7);
        assert_eq!(gray_erode(&img, &origin), img);
        assert_eq!(gray_dilate(&img, &origin), img);
        let zero = ImageTensor::filled(4, 4, 1, 0.0);
        let se = StructuringElement::square3();
        assert_eq!(gray_erode(&zero, &se), zero);
        assert_eq!(gray_dilate(&zero, &se), zero);
    }

    #[test]
    fn moop_constant_image_is_flat_in_interior() {
        let img = ImageTensor::filled(6, 6, 1, 0.4);
        let maps = moop_features(&img).unwrap();
        for y in 1..5 {
            for x in 1..5 {
                assert_eq!(maps.gradient.at(y, x), 0.0);
                assert_eq!(maps.opening_residual.at(y, x), 0.0);
            }
        }
    }

    #[test]
    fn moop_step_edge_gradient() {
        // Columns 0..3 are 0, columns 3..6 are 1.
        let mut img = ImageTensor::filled(6, 6, 1, 0.0);
        for y in 0..6 {
            for x in 3..6 {
                img.set(y, x, 0, 1.0);
            }
        }
        let maps = moop_features(&img).unwrap();
        // Interior rows only; border rows see out-of-bounds zeros.
        for y in 1..5 {
            for x in 1..5 {
                let expect = if x == 2 || x == 3 { 1.0 } else { 0.0 };
                assert_eq!(maps.gradient.at(y, x), expect, "at ({y},{x})");
            }
        }
    }

    #[test]
    fn moop_single_bright_pixel_residual() {
        let mut img = ImageTensor::filled(7, 7, 1, 0.0);
        img.set(3, 3, 0, 0.8);
        let maps = moop_features(&img).unwrap();
        assert_eq!(maps.opening_residual.at(3, 3), 0.8);
        assert_eq!(maps.opening_residual.at(1, 1), 0.0);
    }

    proptest! {
        #[test]
        fn sandwich_and_duality(seed in any::<u64>()) {
            let a = oracle::random_binary(7, 7, seed);
            let b = StructuringElement::square3();
            let e = erode(&a, &b);
            let d = dilate(&a, &b);
            for i in 0..a.data().len() {
                // erode ⊆ a ⊆ dilate for origin-containing elements.
                prop_assert!(!e.data()[i] || a.data()[i]);
                prop_assert!(!a.data()[i] || d.data()[i]);
            }
            // Duality away from the border (out-of-bounds breaks it there).
            let ce = complement(&erode(&a, &b));
            let dc = dilate(&complement(&a), &b);
            for y in 1..6 {
                for x in 1..6 {
                    prop_assert_eq!(ce.get(y, x), dc.get(y, x));
                }
            }
        }

        #[test]
        fn open_shrinks_close_grows(seed in any::<u64>()) {
            let a = oracle::random_binary(6, 6, seed);
            let b = StructuringElement::cross();
            let o = open(&a, &b);
            let c = close(&a, &b);
            for i in 0..a.data().len() {
                prop_assert!(!o.data()[i] || a.data()[i]);
            }
            // Closing grows only away from the border, where the final
            // erosion is not forced to fail by out-of-bounds background.
            for y in 1..5 {
                for x in 1..5 {
                    prop_assert!(!a.get(y, x) || c.get(y, x));
                }
            }
        }
    }
}
