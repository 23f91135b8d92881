//! The selective-feature-expression network: five per-stream LSTMs over
//! frame sequences, a cross-stream softmax gate, a fused classifier, and
//! deterministic full-batch training with analytically derived gradients.
//!
//! Everything is 64-bit so the finite-difference checks in `train` are
//! meaningful.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_checkpoint_string};
pub use model::{
    backward, forward, frame_scores, gate_weights, lstm_step, loss, loss_grad, Affine,
    ForwardOutput, GateMode, LstmGates, LstmParams, Mat, ModelDims, SfeModel, StreamParams,
};
pub use train::{fit_standardization, gradient_check, init_model, train, TrainConfig, TrainOutput};

use thiserror::Error;

use crate::pooling::FeatureBundle;

#[derive(Debug, Error)]
pub enum SfenetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence must contain at least one frame")]
    EmptySequence,
    #[error("training data must contain both labels")]
    SingleClassData,
    #[error("training data is empty")]
    EmptyData,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Time-ordered feature bundles of one video plus label and optional
/// per-frame landmark vectors.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub video_id: String,
    pub bundles: Vec<FeatureBundle>,
    /// One vector per frame, uniform length, when present.
    pub landmarks: Option<Vec<Vec<f64>>>,
    /// 0 = real, 1 = fake.
    pub label: u8,
}

impl FrameSequence {
    pub fn validate(&self) -> Result<(), SfenetError> {
        if self.bundles.is_empty() {
            return Err(SfenetError::EmptySequence);
        }
        let dims = self.bundles[0].dims();
        if self.bundles.iter().any(|b| b.dims() != dims) {
            return Err(SfenetError::ShapeMismatch(format!(
                "bundles of video {} disagree on stream dims",
                self.video_id
            )));
        }
        if let Some(lms) = &self.landmarks {
            if lms.len() != self.bundles.len() {
                return Err(SfenetError::ShapeMismatch(format!(
                    "video {}: {} landmark rows for {} frames",
                    self.video_id,
                    lms.len(),
                    self.bundles.len()
                )));
            }
            let k = lms[0].len();
            if lms.iter().any(|l| l.len() != k) {
                return Err(SfenetError::ShapeMismatch(format!(
                    "video {}: landmark vectors of unequal length",
                    self.video_id
                )));
            }
        }
        Ok(())
    }

    /// Temporal mean of the landmark vectors, padded/zeroed to `dim`.
    pub fn landmark_mean(&self, dim: usize) -> Result<Vec<f64>, SfenetError> {
        match &self.landmarks {
            None => Ok(vec![0.0; dim]),
            Some(lms) => {
                if lms.is_empty() || lms[0].len() != dim {
                    return Err(SfenetError::ShapeMismatch(format!(
                        "video {}: landmark length {} does not match model {}",
                        self.video_id,
                        lms.first().map_or(0, |l| l.len()),
                        dim
                    )));
                }
                let mut mean = vec![0.0; dim];
                for row in lms {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                for m in &mut mean {
                    *m /= lms.len() as f64;
                }
                Ok(mean)
            }
        }
    }
}
