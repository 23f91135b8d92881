//! Deterministic synthetic tampered-video generator.
//!
//! Real sequences are smooth low-frequency gradients plus band-limited
//! noise with slow temporal drift. Each forgery family perturbs a
//! jittering rectangular region and targets one extractor: `splice`
//! pastes differently-lit donor content with a hard boundary (lighting
//! and edge evidence), `smooth` blurs away high frequencies (phase
//! evidence), `recompress` runs the region through a low-quality
//! block-DCT round trip (residual evidence), `texture_swap` overlays
//! anisotropically correlated noise (texture evidence). All output is a
//! pure function of the config; per-video streams are derived with
//! `rng::derive_seed`, so parallel and sequential generation agree.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::compression::{roundtrip, QuantSpec};
use crate::imagecore::{write_pnm, ImageError, ImageTensor};
use crate::manifest::{write_landmarks, write_manifest, ManifestError, VideoRecord};
use crate::rng::{derive_seed, Xoshiro256PlusPlus};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("unknown forgery family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four forgery families, one per detection target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Splice,
    Smooth,
    Recompress,
    TextureSwap,
}

impl Family {
    pub const ALL: [Family; 4] =
        [Family::Splice, Family::Smooth, Family::Recompress, Family::TextureSwap];

    pub fn name(self) -> &'static str {
        match self {
            Family::Splice => "splice",
            Family::Smooth => "smooth",
            Family::Recompress => "recompress",
            Family::TextureSwap => "texture_swap",
        }
    }

    pub fn parse(s: &str) -> Result<Family, SynthError> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SynthError::UnknownFamily(s.to_string()))
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_videos: usize,
    pub frames_per_video: usize,
    pub height: usize,
    pub width: usize,
    /// Proportions over [splice, smooth, recompress, texture_swap];
    /// must sum to 1.
    pub forgery_mix: [f64; 4],
    /// Manipulation strength in (0, 1].
    pub severity: f64,
    /// Emit dummy landmark files alongside the frames.
    pub landmarks: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_videos: 10,
            frames_per_video: 4,
            height: 64,
            width: 64,
            forgery_mix: [0.25; 4],
            severity: 0.8,
            landmarks: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_videos == 0 {
            return Err(SynthError::BadConfig("n_videos must be >= 1".into()));
        }
        if self.frames_per_video < 2 {
            return Err(SynthError::BadConfig(
                "frames_per_video must be >= 2 (temporal discontinuity needs two frames)".into(),
            ));
        }
        if self.height < 16 || self.width < 16 {
            return Err(SynthError::BadConfig("frames must be at least 16x16".into()));
        }
        let sum: f64 = self.forgery_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.forgery_mix.iter().any(|&p| p < 0.0) {
            return Err(SynthError::BadConfig("forgery_mix must sum to 1".into()));
        }
        if !(0.0..=1.0).contains(&self.severity) || self.severity == 0.0 {
            return Err(SynthError::BadConfig("severity must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Band-limited noise field: uniform noise box-blurred twice.
#[derive(Clone)]
struct NoiseField {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl NoiseField {
    fn new(h: usize, w: usize, rng: &mut Xoshiro256PlusPlus) -> Self {
        let mut data: Vec<f64> = (0..h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
        for _ in 0..2 {
            data = box_blur(&data, h, w);
        }
        Self { h, w, data }
    }

    /// Unblurred white-noise field.
    fn raw(h: usize, w: usize, rng: &mut Xoshiro256PlusPlus) -> Self {
        let data: Vec<f64> = (0..h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Self { h, w, data }
    }

    /// Bilinear sample with wraparound, so drift never runs off the field.
    fn sample(&self, y: f64, x: f64) -> f64 {
        let wrap = |v: f64, n: usize| -> f64 {
            let n = n as f64;
            ((v % n) + n) % n
        };
        let y = wrap(y, self.h);
        let x = wrap(x, self.w);
        let (y0, x0) = (y.floor() as usize % self.h, x.floor() as usize % self.w);
        let (y1, x1) = ((y0 + 1) % self.h, (x0 + 1) % self.w);
        let (fy, fx) = (y - y.floor(), x - x.floor());
        let at = |yy: usize, xx: usize| self.data[yy * self.w + xx];
        at(y0, x0) * (1.0 - fy) * (1.0 - fx)
            + at(y0, x1) * (1.0 - fy) * fx
            + at(y1, x0) * fy * (1.0 - fx)
            + at(y1, x1) * fy * fx
    }
}

fn box_blur(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let (py, px) = (y as i32 + dy, x as i32 + dx);
                    if py >= 0 && py < h as i32 && px >= 0 && px < w as i32 {
                        sum += data[py as usize * w + px as usize];
                        n += 1.0;
                    }
                }
            }
            out[y * w + x] = sum / n;
        }
    }
    out
}

/// Scene parameters for one pristine sequence, drawn once per video.
struct Scene {
    fx: f64,
    fy: f64,
    phase: f64,
    drift: f64,
    gains: [f64; 3],
    offsets: [f64; 3],
    noise: NoiseField,
    vx: f64,
    vy: f64,
    /// Unsmoothed fine grain; the high-frequency content that smoothing
    /// and requantization visibly destroy.
    grain: NoiseField,
    gvx: f64,
    gvy: f64,
}

impl Scene {
    fn draw(cfg: &GenConfig, rng: &mut Xoshiro256PlusPlus) -> Self {
        Self {
            fx: rng.uniform(0.5, 1.5),
            fy: rng.uniform(0.5, 1.5),
            phase: rng.uniform(0.0, std::f64::consts::TAU),
            drift: rng.uniform(0.02, 0.05),
            gains: std::array::from_fn(|_| rng.uniform(0.8, 1.0)),
            offsets: std::array::from_fn(|_| rng.uniform(-0.04, 0.04)),
            noise: NoiseField::new(cfg.height, cfg.width, rng),
            vx: rng.uniform(-0.4, 0.4),
            vy: rng.uniform(-0.4, 0.4),
            grain: NoiseField::raw(cfg.height, cfg.width, rng),
            gvx: rng.uniform(-0.3, 0.3),
            gvy: rng.uniform(-0.3, 0.3),
        }
    }

    fn frame(&self, cfg: &GenConfig, t: usize) -> ImageTensor {
        let (h, w) = (cfg.height, cfg.width);
        let mut data = Vec::with_capacity(h * w * 3);
        let t = t as f64;
        for y in 0..h {
            for x in 0..w {
                let base = (std::f64::consts::TAU
                    * (self.fx * x as f64 / w as f64 + self.fy * y as f64 / h as f64)
                    + self.phase
                    + self.drift * t)
                    .sin();
                let n = self.noise.sample(y as f64 + self.vy * t, x as f64 + self.vx * t);
                let grain =
                    self.grain.sample(y as f64 + self.gvy * t, x as f64 + self.gvx * t);
                for c in 0..3 {
                    let v = 0.55
                        + 0.18 * base * self.gains[c]
                        + 0.12 * n
                        + 0.035 * grain
                        + self.offsets[c];
                    data.push(v.clamp(0.01, 0.99));
                }
            }
        }
        ImageTensor::new(h, w, 3, data).expect("clamped into range")
    }
}

/// Pristine frames for one video, derived from (cfg.seed, video index).
pub fn gen_real(cfg: &GenConfig, video_seed: u64) -> Vec<ImageTensor> {
    let mut rng = Xoshiro256PlusPlus::new(video_seed);
    let scene = Scene::draw(cfg, &mut rng);
    (0..cfg.frames_per_video).map(|t| scene.frame(cfg, t)).collect()
}

fn draw_scene(cfg: &GenConfig, seed: u64) -> Scene {
    let mut rng = Xoshiro256PlusPlus::new(seed);
    Scene::draw(cfg, &mut rng)
}

/// Tampered region for one video: a centered-ish rectangle jittered by
/// one pixel per frame.
struct Region {
    y0: usize,
    x0: usize,
    rh: usize,
    rw: usize,
}

fn draw_region(cfg: &GenConfig, rng: &mut Xoshiro256PlusPlus) -> Region {
    // Roughly half the frame per side, so the artifact reliably covers
    // several pooling cells regardless of placement.
    let rh = cfg.height / 2 + rng.next_below((cfg.height / 8).max(1) as u64) as usize;
    let rw = cfg.width / 2 + rng.next_below((cfg.width / 8).max(1) as u64) as usize;
    let y0 = cfg.height / 16 + rng.next_below(((cfg.height - rh) / 2).max(1) as u64) as usize;
    let x0 = cfg.width / 16 + rng.next_below(((cfg.width - rw) / 2).max(1) as u64) as usize;
    Region { y0, x0, rh, rw }
}

fn jitter(region: &Region, cfg: &GenConfig, rng: &mut Xoshiro256PlusPlus) -> Region {
    let mut j = |v: usize, max: usize| -> usize {
        let delta = rng.next_below(3) as i64 - 1;
        (v as i64 + delta).clamp(0, max as i64) as usize
    };
    Region {
        y0: j(region.y0, cfg.height - region.rh),
        x0: j(region.x0, cfg.width - region.rw),
        rh: region.rh,
        rw: region.rw,
    }
}

fn blend_region(
    frame: &mut ImageTensor,
    region: &Region,
    severity: f64,
    mut replacement: impl FnMut(usize, usize, usize, f64) -> f64,
) {
    for y in region.y0..region.y0 + region.rh {
        for x in region.x0..region.x0 + region.rw {
            for c in 0..frame.channels() {
                let orig = frame.get(y, x, c);
                let new = replacement(y, x, c, orig);
                let v = (1.0 - severity) * orig + severity * new;
                frame.set(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
}

/// Tampered frames for one video.
pub fn gen_fake(cfg: &GenConfig, video_seed: u64, family: Family) -> Vec<ImageTensor> {
    let host = draw_scene(cfg, video_seed);
    let mut frames: Vec<ImageTensor> =
        (0..cfg.frames_per_video).map(|t| host.frame(cfg, t)).collect();
    let mut rng = Xoshiro256PlusPlus::new(derive_seed(video_seed, 0xFA4E));
    let base_region = draw_region(cfg, &mut rng);
    let severity = cfg.severity;

    // Family-wide resources drawn once so frames stay temporally coherent.
    let donor: Option<Vec<ImageTensor>> = match family {
        Family::Splice => {
            // The donor reuses the host grain field, so the paste differs in
            // lighting and structure but not in fine-grain statistics: the
            // evidence is the hard boundary, not a texture change.
            let mut d = draw_scene(cfg, derive_seed(video_seed, 0xD002));
            d.grain = host.grain.clone();
            d.gvx = host.gvx;
            d.gvy = host.gvy;
            Some((0..cfg.frames_per_video).map(|t| d.frame(cfg, t)).collect())
        }
        _ => None,
    };
    let swap_noise: Option<NoiseField> = match family {
        Family::TextureSwap => {
            // Anisotropic grain: correlated along x, white along y. Swapped
            // in for the host grain at matched amplitude, so only the
            // micro-pattern changes, not the high-frequency energy.
            let (h, w) = (cfg.height, cfg.width);
            let mut raw: Vec<f64> = (0..h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
            for y in 0..h {
                let row: Vec<f64> = (0..w)
                    .map(|x| {
                        let mut s = 0.0;
                        for dx in -3i32..=3 {
                            let px = (x as i32 + dx).rem_euclid(w as i32) as usize;
                            s += raw[y * w + px];
                        }
                        s / 7.0
                    })
                    .collect();
                raw[y * w..(y + 1) * w].copy_from_slice(&row);
            }
            Some(NoiseField { h, w, data: raw })
        }
        _ => None,
    };
    // Moderate quality: coarse enough to flatten grain, fine enough that
    // block edges stay subtle relative to the residual signature.
    let quant = QuantSpec::from_quality(35).expect("fixed quality");

    // Host grain value at a drifted pixel, matching Scene::frame.
    let grain_at = |y: usize, x: usize, t: f64| {
        0.035 * host.grain.sample(y as f64 + host.gvy * t, x as f64 + host.gvx * t)
    };

    for (t, frame) in frames.iter_mut().enumerate() {
        let region = jitter(&base_region, cfg, &mut rng);
        match family {
            Family::Splice => {
                let donor_frame = &donor.as_ref().unwrap()[t];
                blend_region(frame, &region, severity, |y, x, c, _| {
                    (donor_frame.get(y, x, c) + 0.10).clamp(0.0, 1.0)
                });
            }
            Family::Smooth => {
                // Box blur the region (radius 3, three passes) per channel,
                // then restore the host grain. The blur flattens structure
                // and grain alike; putting the grain back leaves fine-grain
                // energy intact so the edit reads as structural smoothing,
                // not as a grain change.
                let blurred = blur_region(frame, &region, 3, 3);
                blend_region(frame, &region, severity, |y, x, c, _| {
                    let b = blurred[((y - region.y0) * region.rw + (x - region.x0)) * 3 + c];
                    (b + grain_at(y, x, t as f64)).clamp(0.0, 1.0)
                });
            }
            Family::Recompress => {
                let rec = recompress_region(frame, &region, &quant);
                blend_region(frame, &region, severity, |y, x, c, _| {
                    rec[((y - region.y0) * region.rw + (x - region.x0)) * 3 + c]
                });
            }
            Family::TextureSwap => {
                // Swap the host grain for the anisotropic pattern at matched
                // per-pixel amplitude (raw grain std 0.577 * 0.035 vs 7-tap
                // x-blurred noise std 0.577 / sqrt(7)), so the micro-texture
                // ordering changes while the noise energy stays put.
                let noise = swap_noise.as_ref().unwrap();
                blend_region(frame, &region, severity, |y, x, _, orig| {
                    let swapped = 0.0926 * noise.sample(y as f64, x as f64 + t as f64);
                    (orig - grain_at(y, x, t as f64) + swapped).clamp(0.0, 1.0)
                });
            }
        }
    }
    frames
}

/// Region crop blurred with repeated box passes; returns row-major RGB.
fn blur_region(frame: &ImageTensor, region: &Region, radius: i32, passes: usize) -> Vec<f64> {
    let (rh, rw) = (region.rh, region.rw);
    let mut channels: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            (0..rh * rw)
                .map(|i| frame.get(region.y0 + i / rw, region.x0 + i % rw, c))
                .collect()
        })
        .collect();
    for ch in &mut channels {
        for _ in 0..passes {
            let mut next = vec![0.0; rh * rw];
            for y in 0..rh as i32 {
                for x in 0..rw as i32 {
                    let mut sum = 0.0;
                    let mut n = 0.0;
                    for dy in -radius..=radius {
                        for dx in -radius..=radius {
                            let (py, px) = (y + dy, x + dx);
                            if py >= 0 && py < rh as i32 && px >= 0 && px < rw as i32 {
                                sum += ch[py as usize * rw + px as usize];
                                n += 1.0;
                            }
                        }
                    }
                    next[(y * rw as i32 + x) as usize] = sum / n;
                }
            }
            *ch = next;
        }
    }
    let mut out = vec![0.0; rh * rw * 3];
    for i in 0..rh * rw {
        for c in 0..3 {
            out[i * 3 + c] = channels[c][i];
        }
    }
    out
}

/// Region crop put through the block-DCT round trip per channel.
fn recompress_region(frame: &ImageTensor, region: &Region, quant: &QuantSpec) -> Vec<f64> {
    let (rh, rw) = (region.rh, region.rw);
    let mut out = vec![0.0; rh * rw * 3];
    for c in 0..3 {
        let crop = ImageTensor::new(
            rh,
            rw,
            1,
            (0..rh * rw)
                .map(|i| frame.get(region.y0 + i / rw, region.x0 + i % rw, c))
                .collect(),
        )
        .expect("crop in range");
        let rec = roundtrip(&crop, quant).expect("roundtrip on valid crop");
        for i in 0..rh * rw {
            out[i * 3 + c] = rec.data()[i];
        }
    }
    out
}

/// Writes the frames, optional landmark files, and the JSONL manifest.
/// Returns the manifest records. Labels alternate real/fake so the split
/// is 50/50 with fakes rounded down; fake records carry their family.
pub fn gen_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<Vec<VideoRecord>, SynthError> {
    cfg.validate()?;
    let created_root = !out_dir.exists();
    fs::create_dir_all(out_dir)?;
    let result = gen_dataset_inner(cfg, out_dir);
    if result.is_err() {
        // Best effort cleanup so no partial dataset survives.
        if created_root {
            let _ = fs::remove_dir_all(out_dir);
        } else {
            let _ = fs::remove_file(out_dir.join("manifest.jsonl"));
            for i in 0..cfg.n_videos {
                let _ = fs::remove_dir_all(out_dir.join(format!("v{i:04}")));
            }
        }
    }
    result
}

fn choose_family(mix: &[f64; 4], rng: &mut Xoshiro256PlusPlus) -> Family {
    let draw = rng.next_f64();
    let mut acc = 0.0;
    for (k, &p) in mix.iter().enumerate() {
        acc += p;
        if draw < acc {
            return Family::ALL[k];
        }
    }
    Family::ALL[3]
}

fn gen_dataset_inner(cfg: &GenConfig, out_dir: &Path) -> Result<Vec<VideoRecord>, SynthError> {
    let mut records = Vec::with_capacity(cfg.n_videos);
    for i in 0..cfg.n_videos {
        let video_id = format!("v{i:04}");
        let video_seed = derive_seed(cfg.seed, i as u64);
        let is_fake = i % 2 == 1;
        let family = if is_fake {
            let mut frng = Xoshiro256PlusPlus::new(derive_seed(video_seed, 0xFA11));
            Some(choose_family(&cfg.forgery_mix, &mut frng))
        } else {
            None
        };
        let frames = match family {
            Some(f) => gen_fake(cfg, video_seed, f),
            None => gen_real(cfg, video_seed),
        };
        let vdir = out_dir.join(&video_id);
        fs::create_dir_all(&vdir)?;
        let mut frame_paths = Vec::with_capacity(frames.len());
        for (t, frame) in frames.iter().enumerate() {
            let rel = format!("{video_id}/frame_{t:03}.ppm");
            write_pnm(frame, out_dir.join(&rel))?;
            frame_paths.push(rel);
        }
        let landmarks_path = if cfg.landmarks {
            let mut lrng = Xoshiro256PlusPlus::new(derive_seed(video_seed, 0x1A9D));
            let base: Vec<(f64, f64)> = (0..4)
                .map(|_| (lrng.uniform(0.2, 0.8), lrng.uniform(0.2, 0.8)))
                .collect();
            let rows: Vec<Vec<f64>> = (0..frames.len())
                .map(|_| {
                    base.iter()
                        .flat_map(|&(y, x)| {
                            [
                                (y + 0.01 * lrng.next_gaussian()).clamp(0.0, 1.0),
                                (x + 0.01 * lrng.next_gaussian()).clamp(0.0, 1.0),
                            ]
                        })
                        .collect()
                })
                .collect();
            let rel = format!("{video_id}/landmarks.txt");
            write_landmarks(&rows, out_dir.join(&rel))?;
            Some(rel)
        } else {
            None
        };
        records.push(VideoRecord {
            video_id,
            label: u8::from(is_fake),
            family: family.map(|f| f.name().to_string()),
            frame_paths,
            landmarks_path,
        });
    }
    write_manifest(&records, out_dir.join("manifest.jsonl"))?;
    Ok(records)
}
