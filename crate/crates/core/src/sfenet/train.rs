//! Deterministic full-batch training and the finite-difference gradient
//! check.

use crate::rng::Xoshiro256PlusPlus;

use super::model::{backward, forward, GateMode, ModelDims, SfeModel};
use super::{FrameSequence, SfenetError};

/// Training hyperparameters. Defaults are the ones the acceptance runs
/// use.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub init_scale: f64,
    pub gate_mode: GateMode,
    pub active: [bool; 5],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            learning_rate: 0.25,
            momentum: 0.9,
            epochs: 300,
            hidden: 8,
            init_scale: 0.1,
            gate_mode: GateMode::Softmax,
            active: [true; 5],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SfenetError> {
        if self.learning_rate < 0.0 {
            return Err(SfenetError::BadConfig("learning_rate must be >= 0".into()));
        }
        if self.hidden == 0 {
            return Err(SfenetError::BadConfig("hidden size must be >= 1".into()));
        }
        if !self.active.iter().any(|&a| a) {
            return Err(SfenetError::BadConfig("at least one stream must be active".into()));
        }
        Ok(())
    }
}

/// Model plus the per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: SfeModel,
    pub loss_trace: Vec<f64>,
}

/// Seeded uniform(−init_scale, init_scale) initialization over the
/// canonical tensor order, then +1 on every forget-gate bias.
pub fn init_model(dims: ModelDims, cfg: &TrainConfig) -> SfeModel {
    let mut model = SfeModel::zeros(dims, cfg.gate_mode, cfg.active);
    let mut rng = Xoshiro256PlusPlus::new(cfg.seed);
    for (_, tensor) in model.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = rng.uniform(-cfg.init_scale, cfg.init_scale);
        }
    }
    for sp in &mut model.streams {
        for b in &mut sp.lstm.b[super::model::GATE_F] {
            *b += 1.0;
        }
    }
    model
}

/// Mean loss and mean gradient over the whole dataset, accumulated in
/// sequence index order so results are bit-reproducible.
fn batch_gradient(
    data: &[FrameSequence],
    model: &SfeModel,
) -> Result<(f64, SfeModel), SfenetError> {
    let mut grad = model.zeros_like();
    let mut total = 0.0;
    for seq in data {
        let out = forward(seq, model)?;
        total += backward(seq, model, &out, &mut grad)?;
    }
    let n = data.len() as f64;
    for (_, tensor) in grad.tensors_mut() {
        for v in tensor.iter_mut() {
            *v /= n;
        }
    }
    Ok((total / n, grad))
}

/// Full-batch gradient descent with momentum. Same seed and data give a
/// bit-identical model.
pub fn train(data: &[FrameSequence], cfg: &TrainConfig) -> Result<TrainOutput, SfenetError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(SfenetError::EmptyData);
    }
    for seq in data {
        seq.validate()?;
    }
    let labels: Vec<u8> = data.iter().map(|s| s.label).collect();
    if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
        return Err(SfenetError::SingleClassData);
    }
    let stream_dims = data[0].bundles[0].dims();
    let landmark_dim = data
        .iter()
        .filter_map(|s| s.landmarks.as_ref())
        .map(|l| l[0].len())
        .next()
        .unwrap_or(0);
    let dims = ModelDims { stream_dims, hidden: cfg.hidden, landmark_dim };
    let mut model = init_model(dims, cfg);
    let (mean, std) = fit_standardization(data);
    model.feat_mean = mean;
    model.feat_std = std;
    let mut velocity = model.zeros_like();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (mean_loss, grad) = batch_gradient(data, &model)?;
        loss_trace.push(mean_loss);
        let gt = grad.tensors();
        let mut vt = velocity.tensors_mut();
        for ((_, v), (_, g)) in vt.iter_mut().zip(gt.iter()) {
            for (vi, gi) in v.iter_mut().zip(g.iter()) {
                *vi = cfg.momentum * *vi - cfg.learning_rate * gi;
            }
        }
        let vt = velocity.tensors();
        let mut mt = model.tensors_mut();
        for ((_, m), (_, v)) in mt.iter_mut().zip(vt.iter()) {
            for (mi, vi) in m.iter_mut().zip(v.iter()) {
                *mi += vi;
            }
        }
    }
    Ok(TrainOutput { model, loss_trace })
}

/// Per-stream per-dimension mean and population std over every frame of
/// the dataset. Near-constant dimensions keep std 1 so they pass through
/// centered instead of amplifying rounding noise. The stored scale also
/// folds in a sqrt(dim / min dim) factor per stream, equalizing expected
/// squared norm across streams; without it the widest stream feeds
/// several times more input energy into its recurrent cell and soaks up
/// the gate regardless of how informative it is.
pub fn fit_standardization(data: &[FrameSequence]) -> ([Vec<f64>; 5], [Vec<f64>; 5]) {
    let dims = data[0].bundles[0].dims();
    let mut mean: [Vec<f64>; 5] = std::array::from_fn(|k| vec![0.0; dims[k]]);
    let mut std: [Vec<f64>; 5] = std::array::from_fn(|k| vec![0.0; dims[k]]);
    let n: f64 = data.iter().map(|s| s.bundles.len() as f64).sum();
    for seq in data {
        for bundle in &seq.bundles {
            for (k, vec) in bundle.vectors().iter().enumerate() {
                for (m, v) in mean[k].iter_mut().zip(&vec.values) {
                    *m += v;
                }
            }
        }
    }
    for m in mean.iter_mut().flat_map(|v| v.iter_mut()) {
        *m /= n;
    }
    for seq in data {
        for bundle in &seq.bundles {
            for (k, vec) in bundle.vectors().iter().enumerate() {
                for ((s, v), m) in std[k].iter_mut().zip(&vec.values).zip(&mean[k]) {
                    let d = v - m;
                    *s += d * d;
                }
            }
        }
    }
    let base_dim = *dims.iter().min().expect("five streams") as f64;
    for (k, sv) in std.iter_mut().enumerate() {
        let balance = (dims[k] as f64 / base_dim).sqrt();
        for s in sv.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
            *s *= balance;
        }
    }
    (mean, std)
}

/// Central finite-difference check of every parameter against the
/// analytic gradient of the loss on one sequence. Returns the maximum
/// relative error, with the denominator floored at 1e-6 so exactly-zero
/// gradients compare on absolute terms.
pub fn gradient_check(model: &SfeModel, seq: &FrameSequence) -> Result<f64, SfenetError> {
    let out = forward(seq, model)?;
    let mut grad = model.zeros_like();
    backward(seq, model, &out, &mut grad)?;

    let mut probe = model.clone();
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let n_tensors = model.tensors().len();
    for ti in 0..n_tensors {
        let len = model.tensors()[ti].1.len();
        for j in 0..len {
            let orig = probe.tensors()[ti].1[j];
            probe.tensors_mut()[ti].1[j] = orig + h;
            let up = {
                let o = forward(seq, &probe)?;
                super::model::loss(o.score, seq.label)
            };
            probe.tensors_mut()[ti].1[j] = orig - h;
            let down = {
                let o = forward(seq, &probe)?;
                super::model::loss(o.score, seq.label)
            };
            probe.tensors_mut()[ti].1[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.tensors()[ti].1[j];
            let rel = (analytic - numeric).abs()
                / (analytic.abs() + numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
