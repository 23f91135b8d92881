//! Dataset manifest (JSON Lines) and the loaders shared by the CLI
//! commands.
//!
//! One record per video; `frame_paths` and `landmarks_path` are relative
//! to the manifest's directory. Landmark files are plain text, one line
//! per frame, whitespace-separated floats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{read_pnm, ImageError, ImageTensor};
use crate::pooling::{extract_bundle, ExtractConfig, PoolingError};
use crate::sfenet::FrameSequence;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("manifest record {video_id}: {msg}")]
    BadVideo { video_id: String, msg: String },
    #[error("missing frames: {0:?}")]
    MissingFrames(Vec<String>),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One video's entry in the dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    /// 0 = real, 1 = fake.
    pub label: u8,
    /// Forgery family for fakes, `null` for real videos.
    pub family: Option<String>,
    pub frame_paths: Vec<String>,
    pub landmarks_path: Option<String>,
}

pub fn write_manifest(records: &[VideoRecord], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let mut f = fs::File::create(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)
            .map_err(|e| ManifestError::BadVideo { video_id: r.video_id.clone(), msg: e.to_string() })?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>, ManifestError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: VideoRecord = serde_json::from_str(line)
            .map_err(|e| ManifestError::BadRecord { line: i + 1, msg: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Per-frame landmark vectors, one whitespace-separated line per frame.
pub fn read_landmarks(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>, ManifestError> {
    let text = fs::read_to_string(&path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| ManifestError::BadRecord {
                    line: i + 1,
                    msg: format!("bad landmark value {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_landmarks(rows: &[Vec<f64>], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads one video's frames, resolving paths against the manifest
/// directory.
pub fn load_frames(
    record: &VideoRecord,
    manifest_dir: &Path,
) -> Result<Vec<ImageTensor>, ManifestError> {
    let missing: Vec<String> = record
        .frame_paths
        .iter()
        .filter(|p| !manifest_dir.join(p).exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(ManifestError::MissingFrames(missing));
    }
    record
        .frame_paths
        .iter()
        .map(|p| Ok(read_pnm(manifest_dir.join(p))?))
        .collect()
}

/// Runs the extractors over every frame of every record, in manifest
/// order, producing one `FrameSequence` per video.
pub fn load_sequences(
    manifest_path: &Path,
    cfg: &ExtractConfig,
) -> Result<Vec<FrameSequence>, ManifestError> {
    let dir = manifest_dir(manifest_path);
    let records = read_manifest(manifest_path)?;
    let mut out = Vec::with_capacity(records.len());
    for rec in &records {
        let frames = load_frames(rec, &dir)?;
        if frames.is_empty() {
            return Err(ManifestError::BadVideo {
                video_id: rec.video_id.clone(),
                msg: "no frames".into(),
            });
        }
        let bundles = frames
            .iter()
            .map(|f| extract_bundle(f, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        let landmarks = match &rec.landmarks_path {
            None => None,
            Some(p) => {
                let rows = read_landmarks(dir.join(p))?;
                if rows.len() != frames.len() {
                    return Err(ManifestError::BadVideo {
                        video_id: rec.video_id.clone(),
                        msg: format!("{} landmark rows for {} frames", rows.len(), frames.len()),
                    });
                }
                Some(rows)
            }
        };
        out.push(FrameSequence {
            video_id: rec.video_id.clone(),
            bundles,
            landmarks,
            label: rec.label,
        });
    }
    Ok(out)
}

pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let records = vec![
            VideoRecord {
                video_id: "v000".into(),
                label: 0,
                family: None,
                frame_paths: vec!["v000/f0.ppm".into()],
                landmarks_path: None,
            },
            VideoRecord {
                video_id: "v001".into(),
                label: 1,
                family: Some("splice".into()),
                frame_paths: vec!["v001/f0.ppm".into(), "v001/f1.ppm".into()],
                landmarks_path: Some("v001/landmarks.txt".into()),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        write_manifest(&records, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), records);
    }

    #[test]
    fn landmarks_round_trip() {
        let rows = vec![vec![0.25, -1.5, 3.0], vec![0.1, 0.2, 0.3]];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.txt");
        write_landmarks(&rows, &path).unwrap();
        let back = read_landmarks(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn missing_frames_reported_by_id() {
        let rec = VideoRecord {
            video_id: "vX".into(),
            label: 0,
            family: None,
            frame_paths: vec!["vX/missing.ppm".into()],
            landmarks_path: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let err = load_frames(&rec, dir.path()).unwrap_err();
        assert!(matches!(err, ManifestError::MissingFrames(ref m) if m[0].contains("missing")));
    }

    #[test]
    fn malformed_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"video_id\": 3}\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(ManifestError::BadRecord { line: 1, .. })));
    }
}
