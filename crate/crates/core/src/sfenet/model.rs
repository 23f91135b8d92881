//! Model parameters, forward pass, and the analytic backward pass.

use crate::pooling::Stream;

use super::{FrameSequence, SfenetError};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// y = M·x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    /// Accumulates Mᵀ·v into `out`.
    pub fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let vr = v[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o += vr * a;
            }
        }
    }

    /// self += u·vᵀ
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            let ur = u[r];
            for (o, b) in row.iter_mut().zip(v) {
                *o += ur * b;
            }
        }
    }
}

/// y = W·x + b
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self { w: Mat::zeros(out_dim, in_dim), b: vec![0.0; out_dim] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        y
    }
}

/// Gate index order used throughout: input, forget, output, cell.
pub const GATE_I: usize = 0;
pub const GATE_F: usize = 1;
pub const GATE_O: usize = 2;
pub const GATE_G: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["i", "f", "o", "g"];

/// One LSTM cell's parameters: per-gate input weights, recurrent weights,
/// and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub wx: [Mat; 4],
    pub wh: [Mat; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            wx: std::array::from_fn(|_| Mat::zeros(hidden, input)),
            wh: std::array::from_fn(|_| Mat::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }
}

/// Activations of one LSTM step, cached for backprop.
#[derive(Debug, Clone)]
pub struct LstmGates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM cell update:
/// i = σ(W_i x + U_i h + b_i), f, o likewise, g = tanh(·);
/// c' = f⊙c + i⊙g; h' = o⊙tanh(c').
pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<LstmGates, SfenetError> {
    let hidden = params.b[0].len();
    if params.wx[0].cols != x.len() || h.len() != hidden || c.len() != hidden {
        return Err(SfenetError::ShapeMismatch(format!(
            "lstm_step: x={} h={} c={} vs input={} hidden={}",
            x.len(),
            h.len(),
            c.len(),
            params.wx[0].cols,
            hidden
        )));
    }
    let pre = |gate: usize| -> Vec<f64> {
        let mut z = params.wx[gate].matvec(x);
        let rec = params.wh[gate].matvec(h);
        for ((zi, ri), bi) in z.iter_mut().zip(&rec).zip(&params.b[gate]) {
            *zi += ri + bi;
        }
        z
    };
    let i: Vec<f64> = pre(GATE_I).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = pre(GATE_F).into_iter().map(sigmoid).collect();
    let o: Vec<f64> = pre(GATE_O).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = pre(GATE_G).into_iter().map(f64::tanh).collect();
    let mut c_new = vec![0.0; hidden];
    for k in 0..hidden {
        c_new[k] = f[k] * c[k] + i[k] * g[k];
    }
    let h_new: Vec<f64> = o.iter().zip(&c_new).map(|(ok, ck)| ok * ck.tanh()).collect();
    Ok(LstmGates { i, f, o, g, c: c_new, h: h_new })
}

/// How the five stream summaries are weighted before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    /// Learned softmax over per-stream logits (the selective-expression
    /// mechanism).
    Softmax,
    /// Fixed uniform weights; the ablation baseline.
    Uniform,
}

/// Static shape information. Streams are indexed in `Stream` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub stream_dims: [usize; 5],
    pub hidden: usize,
    pub landmark_dim: usize,
}

/// One stream's parameters: input projection, LSTM, and gate direction.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams {
    pub proj: Affine,
    pub lstm: LstmParams,
    pub gate_a: Vec<f64>,
}

/// All learnable parameters plus the structural flags that select the
/// gating mode and the active streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SfeModel {
    pub dims: ModelDims,
    pub streams: [StreamParams; 5],
    /// Shared gate bias, stored as a 1-element tensor.
    pub gate_bias: Vec<f64>,
    /// Fusion projection: (5·hidden + landmark_dim) -> hidden.
    pub fuse: Affine,
    /// Classifier head: hidden -> 1.
    pub head: Affine,
    pub gate_mode: GateMode,
    pub active: [bool; 5],
    /// Per-stream per-dimension input standardization, fitted on the
    /// training set and frozen (not touched by the optimizer).
    pub feat_mean: [Vec<f64>; 5],
    pub feat_std: [Vec<f64>; 5],
}

impl SfeModel {
    /// All-zero model of the given shape.
    pub fn zeros(dims: ModelDims, gate_mode: GateMode, active: [bool; 5]) -> Self {
        let d = dims.hidden;
        let streams = std::array::from_fn(|k| StreamParams {
            proj: Affine::zeros(d, dims.stream_dims[k]),
            lstm: LstmParams::zeros(d, d),
            gate_a: vec![0.0; d],
        });
        let fuse = Affine::zeros(d, 5 * d + dims.landmark_dim);
        let head = Affine::zeros(1, d);
        let feat_mean = std::array::from_fn(|k| vec![0.0; dims.stream_dims[k]]);
        let feat_std = std::array::from_fn(|k| vec![1.0; dims.stream_dims[k]]);
        Self {
            dims,
            streams,
            gate_bias: vec![0.0],
            fuse,
            head,
            gate_mode,
            active,
            feat_mean,
            feat_std,
        }
    }

    /// Standardized copy of one stream's raw feature vector.
    pub fn normalize_input(&self, k: usize, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.feat_mean[k].iter().zip(&self.feat_std[k]))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    /// Same shape, all parameters zero; used for gradients and momentum.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims.clone(), self.gate_mode, self.active)
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Named views of every parameter tensor, in the canonical order used
    /// by initialization, serialization, and the optimizer.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (k, sp) in self.streams.iter().enumerate() {
            let s = Stream::ALL[k].name();
            out.push((format!("{s}.proj.w"), &sp.proj.w.data));
            out.push((format!("{s}.proj.b"), &sp.proj.b));
            for g in 0..4 {
                out.push((format!("{s}.lstm.wx.{}", GATE_NAMES[g]), &sp.lstm.wx[g].data));
                out.push((format!("{s}.lstm.wh.{}", GATE_NAMES[g]), &sp.lstm.wh[g].data));
                out.push((format!("{s}.lstm.b.{}", GATE_NAMES[g]), &sp.lstm.b[g]));
            }
            out.push((format!("{s}.gate.a"), &sp.gate_a));
        }
        out.push(("gate.bias".into(), &self.gate_bias));
        out.push(("fuse.w".into(), &self.fuse.w.data));
        out.push(("fuse.b".into(), &self.fuse.b));
        out.push(("head.w".into(), &self.head.w.data));
        out.push(("head.b".into(), &self.head.b));
        out
    }

    /// Mutable counterpart of `tensors`, same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out: Vec<(String, &mut Vec<f64>)> = Vec::new();
        for (k, sp) in self.streams.iter_mut().enumerate() {
            let s = Stream::ALL[k].name();
            out.push((format!("{s}.proj.w"), &mut sp.proj.w.data));
            out.push((format!("{s}.proj.b"), &mut sp.proj.b));
            let gates = sp
                .lstm
                .wx
                .iter_mut()
                .zip(sp.lstm.wh.iter_mut())
                .zip(sp.lstm.b.iter_mut());
            for (name, ((wx, wh), b)) in GATE_NAMES.iter().zip(gates) {
                out.push((format!("{s}.lstm.wx.{name}"), &mut wx.data));
                out.push((format!("{s}.lstm.wh.{name}"), &mut wh.data));
                out.push((format!("{s}.lstm.b.{name}"), b));
            }
            out.push((format!("{s}.gate.a"), &mut sp.gate_a));
        }
        out.push(("gate.bias".into(), &mut self.gate_bias));
        out.push(("fuse.w".into(), &mut self.fuse.w.data));
        out.push(("fuse.b".into(), &mut self.fuse.b));
        out.push(("head.w".into(), &mut self.head.w.data));
        out.push(("head.b".into(), &mut self.head.b));
        out
    }

    /// Shape of each named tensor, mirroring `tensors` order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let d = self.dims.hidden;
        for (k, _) in self.streams.iter().enumerate() {
            let s = Stream::ALL[k].name();
            out.push((format!("{s}.proj.w"), vec![d, self.dims.stream_dims[k]]));
            out.push((format!("{s}.proj.b"), vec![d]));
            for name in GATE_NAMES {
                out.push((format!("{s}.lstm.wx.{name}"), vec![d, d]));
                out.push((format!("{s}.lstm.wh.{name}"), vec![d, d]));
                out.push((format!("{s}.lstm.b.{name}"), vec![d]));
            }
            out.push((format!("{s}.gate.a"), vec![d]));
        }
        out.push(("gate.bias".into(), vec![1]));
        out.push(("fuse.w".into(), vec![d, 5 * d + self.dims.landmark_dim]));
        out.push(("fuse.b".into(), vec![d]));
        out.push(("head.w".into(), vec![1, d]));
        out.push(("head.b".into(), vec![1]));
        out
    }
}

/// Softmax gate weights over the active streams' final hidden states:
/// `logit_k = a_k·h_k + b`, `w = softmax(logits)`.
pub fn gate_weights(model: &SfeModel, summaries: &[Vec<f64>; 5]) -> ([f64; 5], [f64; 5]) {
    let mut logits = [0.0f64; 5];
    for k in 0..5 {
        if model.active[k] {
            let mut l = model.gate_bias[0];
            for (a, h) in model.streams[k].gate_a.iter().zip(&summaries[k]) {
                l += a * h;
            }
            logits[k] = l;
        }
    }
    let mut weights = [0.0f64; 5];
    match model.gate_mode {
        GateMode::Uniform => {
            let n = model.n_active() as f64;
            for k in 0..5 {
                if model.active[k] {
                    weights[k] = 1.0 / n;
                }
            }
        }
        GateMode::Softmax => {
            let max = (0..5)
                .filter(|&k| model.active[k])
                .map(|k| logits[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for k in 0..5 {
                if model.active[k] {
                    weights[k] = (logits[k] - max).exp();
                    sum += weights[k];
                }
            }
            for w in &mut weights {
                *w /= sum;
            }
        }
    }
    (weights, logits)
}

/// Binary cross-entropy with score clamped to [1e-12, 1−1e-12].
pub fn loss(score: f64, label: u8) -> f64 {
    let p = score.clamp(1e-12, 1.0 - 1e-12);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// dloss/dscore.
pub fn loss_grad(score: f64, label: u8) -> f64 {
    let p = score.clamp(1e-12, 1.0 - 1e-12);
    if label == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// Per-stream caches recorded by the forward pass.
pub struct StreamTrace {
    /// Standardized raw inputs, pre-projection.
    pub ins: Vec<Vec<f64>>,
    /// Projected inputs x_t.
    pub xs: Vec<Vec<f64>>,
    /// Per-step gate/cell/hidden activations.
    pub steps: Vec<LstmGates>,
}

/// Forward result plus everything backward needs.
pub struct ForwardOutput {
    pub score: f64,
    pub logit: f64,
    pub gates: [f64; 5],
    pub gate_logits: [f64; 5],
    /// Final hidden state per stream (zeros for inactive streams).
    pub stream_h: [Vec<f64>; 5],
    pub traces: [Option<StreamTrace>; 5],
    pub classifier_input: Vec<f64>,
    pub z1: Vec<f64>,
    pub r: Vec<f64>,
}

/// Scores a whole sequence. Streams are keyed, not positional: each
/// stream's parameters consume exactly that stream's bundle vectors.
pub fn forward(seq: &FrameSequence, model: &SfeModel) -> Result<ForwardOutput, SfenetError> {
    seq.validate()?;
    let dims = seq.bundles[0].dims();
    if dims != model.dims.stream_dims {
        return Err(SfenetError::ShapeMismatch(format!(
            "bundle dims {:?} do not match model {:?}",
            dims, model.dims.stream_dims
        )));
    }
    let d = model.dims.hidden;
    let mut stream_h: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; d]);
    let mut traces: [Option<StreamTrace>; 5] = std::array::from_fn(|_| None);
    for k in 0..5 {
        if !model.active[k] {
            continue;
        }
        let sp = &model.streams[k];
        let stream = Stream::ALL[k];
        let mut h = vec![0.0; d];
        let mut c = vec![0.0; d];
        let mut ins = Vec::with_capacity(seq.bundles.len());
        let mut xs = Vec::with_capacity(seq.bundles.len());
        let mut steps = Vec::with_capacity(seq.bundles.len());
        for bundle in &seq.bundles {
            let v = model.normalize_input(k, &bundle.get(stream).values);
            let x = sp.proj.apply(&v);
            let gates = lstm_step(&sp.lstm, &x, &h, &c)?;
            h = gates.h.clone();
            c = gates.c.clone();
            ins.push(v);
            xs.push(x);
            steps.push(gates);
        }
        stream_h[k] = h;
        traces[k] = Some(StreamTrace { ins, xs, steps });
    }
    let (gates, gate_logits) = gate_weights(model, &stream_h);
    let lm = seq.landmark_mean(model.dims.landmark_dim)?;
    let mut classifier_input = vec![0.0; 5 * d + model.dims.landmark_dim];
    for k in 0..5 {
        for j in 0..d {
            classifier_input[k * d + j] = gates[k] * stream_h[k][j];
        }
    }
    classifier_input[5 * d..].copy_from_slice(&lm);
    let z1 = model.fuse.apply(&classifier_input);
    let r: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
    let logit = model.head.apply(&r)[0];
    let score = sigmoid(logit);
    Ok(ForwardOutput {
        score,
        logit,
        gates,
        gate_logits,
        stream_h,
        traces,
        classifier_input,
        z1,
        r,
    })
}

/// Accumulates dloss/dθ for one sequence into `grad` (a zeros_like
/// model). Returns the loss.
pub fn backward(
    seq: &FrameSequence,
    model: &SfeModel,
    out: &ForwardOutput,
    grad: &mut SfeModel,
) -> Result<f64, SfenetError> {
    let d = model.dims.hidden;
    let l = loss(out.score, seq.label);
    // σ'∘BCE collapses to (p − y).
    let dlogit = out.score - f64::from(seq.label);

    // Head: logit = head.w · r + head.b
    for j in 0..d {
        grad.head.w.data[j] += dlogit * out.r[j];
    }
    grad.head.b[0] += dlogit;
    let mut dr = vec![0.0; d];
    for j in 0..d {
        dr[j] = dlogit * model.head.w.data[j];
    }

    // ReLU
    let mut dz1 = vec![0.0; d];
    for j in 0..d {
        dz1[j] = if out.z1[j] > 0.0 { dr[j] } else { 0.0 };
    }

    // Fusion projection
    grad.fuse.w.add_outer(&dz1, &out.classifier_input);
    for (gb, dz) in grad.fuse.b.iter_mut().zip(&dz1) {
        *gb += dz;
    }
    let mut du = vec![0.0; model.fuse.w.cols];
    model.fuse.w.matvec_t_acc(&dz1, &mut du);

    // Gate weights and stream hidden states.
    let mut dh_final: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; d]);
    let mut dgate = [0.0f64; 5]; // dL/dw_k
    for k in 0..5 {
        if !model.active[k] {
            continue;
        }
        let dfused = &du[k * d..(k + 1) * d];
        for j in 0..d {
            dgate[k] += dfused[j] * out.stream_h[k][j];
            dh_final[k][j] += out.gates[k] * dfused[j];
        }
    }
    if model.gate_mode == GateMode::Softmax {
        // Softmax backward: dlogit_k = w_k (dw_k − Σ_j w_j dw_j)
        let dot: f64 = (0..5)
            .filter(|&k| model.active[k])
            .map(|k| out.gates[k] * dgate[k])
            .sum();
        for k in 0..5 {
            if !model.active[k] {
                continue;
            }
            let dlog = out.gates[k] * (dgate[k] - dot);
            for j in 0..d {
                grad.streams[k].gate_a[j] += dlog * out.stream_h[k][j];
                dh_final[k][j] += dlog * model.streams[k].gate_a[j];
            }
            grad.gate_bias[0] += dlog;
        }
    }

    // BPTT per stream.
    for k in 0..5 {
        let Some(trace) = &out.traces[k] else { continue };
        let sp = &model.streams[k];
        let gsp = &mut grad.streams[k];
        let t_max = trace.steps.len();
        let mut dh = dh_final[k].clone();
        let mut dc = vec![0.0; d];
        let zero_state = vec![0.0; d];
        for t in (0..t_max).rev() {
            let step = &trace.steps[t];
            let h_prev: &[f64] = if t == 0 { &zero_state } else { &trace.steps[t - 1].h };
            let c_prev: Vec<f64> =
                if t == 0 { vec![0.0; d] } else { trace.steps[t - 1].c.clone() };
            let mut dzi = vec![0.0; d];
            let mut dzf = vec![0.0; d];
            let mut dzo = vec![0.0; d];
            let mut dzg = vec![0.0; d];
            for j in 0..d {
                let tanh_c = step.c[j].tanh();
                let do_j = dh[j] * tanh_c;
                let dc_j = dc[j] + dh[j] * step.o[j] * (1.0 - tanh_c * tanh_c);
                let di_j = dc_j * step.g[j];
                let dg_j = dc_j * step.i[j];
                let df_j = dc_j * c_prev[j];
                dc[j] = dc_j * step.f[j]; // becomes dc_{t-1}
                dzi[j] = di_j * step.i[j] * (1.0 - step.i[j]);
                dzf[j] = df_j * step.f[j] * (1.0 - step.f[j]);
                dzo[j] = do_j * step.o[j] * (1.0 - step.o[j]);
                dzg[j] = dg_j * (1.0 - step.g[j] * step.g[j]);
            }
            let mut dx = vec![0.0; d];
            let mut dh_prev = vec![0.0; d];
            for (gate, dz) in [(GATE_I, &dzi), (GATE_F, &dzf), (GATE_O, &dzo), (GATE_G, &dzg)]
            {
                gsp.lstm.wx[gate].add_outer(dz, &trace.xs[t]);
                gsp.lstm.wh[gate].add_outer(dz, h_prev);
                for (gb, z) in gsp.lstm.b[gate].iter_mut().zip(dz.iter()) {
                    *gb += z;
                }
                sp.lstm.wx[gate].matvec_t_acc(dz, &mut dx);
                sp.lstm.wh[gate].matvec_t_acc(dz, &mut dh_prev);
            }
            // Input projection, against the standardized input.
            gsp.proj.w.add_outer(&dx, &trace.ins[t]);
            for (gb, z) in gsp.proj.b.iter_mut().zip(&dx) {
                *gb += z;
            }
            dh = dh_prev;
        }
    }
    Ok(l)
}

/// Frame-level scores: the score of frame t is the model's output on the
/// prefix ending at t.
pub fn frame_scores(seq: &FrameSequence, model: &SfeModel) -> Result<Vec<f64>, SfenetError> {
    let mut scores = Vec::with_capacity(seq.bundles.len());
    for t in 1..=seq.bundles.len() {
        let prefix = FrameSequence {
            video_id: seq.video_id.clone(),
            bundles: seq.bundles[..t].to_vec(),
            landmarks: seq.landmarks.as_ref().map(|l| l[..t].to_vec()),
            label: seq.label,
        };
        scores.push(forward(&prefix, model)?.score);
    }
    Ok(scores)
}
