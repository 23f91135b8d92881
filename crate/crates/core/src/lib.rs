//! Forensic feature extraction and selective-feature-expression detection
//! for tampered video frames.
//!
//! The pipeline runs five hand-crafted forensic extractors over frame
//! sequences (texture, compression-residual, high-frequency phase,
//! lighting-consistency, morphological), pools each map into a fixed-length
//! vector, and feeds the five streams into per-stream LSTMs fused by a
//! softmax gate that weights the streams per input. A synthetic tampered
//! video generator makes the whole pipeline testable end to end without
//! external corpora.

pub mod cli;
pub mod compression;
pub mod imagecore;
pub mod manifest;
pub mod metrics;
pub mod morphology;
pub mod photometry;
pub mod pooling;
pub mod rng;
pub mod sfenet;
pub mod spectral;
pub mod synthgen;
pub mod texture;

pub use imagecore::{BinaryImage, ImageTensor, StructuringElement};
pub use pooling::{ExtractConfig, FeatureBundle, Stream};
pub use sfenet::{FrameSequence, SfeModel, TrainConfig};
