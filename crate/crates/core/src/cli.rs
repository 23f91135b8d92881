//! Command-line operator surface: `gen`, `extract`, `train`, `eval`.
//!
//! Every flag can also come from a TOML config file (`--config`);
//! explicit flags win over config values, config values win over the
//! documented defaults. Unknown config keys are rejected. All randomness
//! flows from `--seed`; identical inputs and flags give bit-identical
//! outputs.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 config or validation error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::imagecore::{write_pnm, ImageError, ImageTensor};
use crate::manifest::{load_frames, load_sequences, manifest_dir, read_manifest, ManifestError};
use crate::metrics::{report, MetricsError, ScoredSample};
use crate::morphology;
use crate::pooling::{extract_bundle, ExtractConfig, PoolingError, Stream};
use crate::sfenet::{
    frame_scores, load_checkpoint, save_checkpoint, train, GateMode, SfenetError, TrainConfig,
};
use crate::spectral::{self, HighPassSpec};
use crate::compression;
use crate::synthgen::{gen_dataset, Family, GenConfig, SynthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Io = 1,
    Config = 2,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub msg: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        Self { kind: ExitKind::Config, msg: msg.into() }
    }

    fn io(msg: impl Into<String>) -> Self {
        Self { kind: ExitKind::Io, msg: msg.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<PoolingError> for CliError {
    fn from(e: PoolingError) -> Self {
        match e {
            PoolingError::Image(e) => e.into(),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Io(e) => e.into(),
            ManifestError::Image(e) => e.into(),
            ManifestError::MissingFrames(_) => CliError::io(e.to_string()),
            ManifestError::Pooling(p) => p.into(),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(e) => e.into(),
            SynthError::Image(e) => e.into(),
            SynthError::Manifest(m) => m.into(),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<SfenetError> for CliError {
    fn from(e: SfenetError) -> Self {
        match e {
            SfenetError::Io(e) => e.into(),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sfe", about = "Multi-stream forensic video classifier pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tampered-video dataset
    Gen(GenArgs),
    /// Extract pooled forensic features into a CSV
    Extract(ExtractArgs),
    /// Train the gated multi-stream classifier
    Train(TrainArgs),
    /// Evaluate a checkpoint and write metric reports
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// TOML config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of videos [default: 10]
    #[arg(long)]
    videos: Option<usize>,
    /// Frames per video [default: 4]
    #[arg(long)]
    frames: Option<usize>,
    /// Frame height in pixels [default: 64]
    #[arg(long)]
    height: Option<usize>,
    /// Frame width in pixels [default: 64]
    #[arg(long)]
    width: Option<usize>,
    /// Manipulation strength in (0,1] [default: 0.8]
    #[arg(long)]
    severity: Option<f64>,
    /// Restrict fakes to one family: splice, smooth, recompress,
    /// texture_swap [default: mixed]
    #[arg(long)]
    family: Option<String>,
    /// Mix over splice,smooth,recompress,texture_swap, e.g.
    /// "0.25,0.25,0.25,0.25"; must sum to 1 [default: uniform]
    #[arg(long)]
    mix: Option<String>,
    /// Also emit dummy landmark files [default: off]
    #[arg(long)]
    landmarks: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenFile {
    seed: Option<u64>,
    videos: Option<usize>,
    frames: Option<usize>,
    height: Option<usize>,
    width: Option<usize>,
    severity: Option<f64>,
    family: Option<String>,
    mix: Option<Vec<f64>>,
    landmarks: Option<bool>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Dataset manifest (JSON Lines)
    #[arg(long)]
    manifest: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// TOML config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pooling grid size [default: 4]
    #[arg(long)]
    grid: Option<usize>,
    /// Compression round-trip quality 1-100 [default: 50]
    #[arg(long)]
    quality: Option<u32>,
    /// High-pass radius [default: min(H,W)/8 per frame]
    #[arg(long)]
    hp_radius: Option<usize>,
    /// Also write each feature map as a PGM next to the CSV
    /// [default: off]
    #[arg(long)]
    dump_maps: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ExtractFile {
    grid: Option<usize>,
    quality: Option<u32>,
    hp_radius: Option<usize>,
    dump_maps: Option<bool>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest (JSON Lines)
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for model.ckpt and loss.csv
    #[arg(long)]
    out: PathBuf,
    /// TOML config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initialization seed [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate [default: 0.25]
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum coefficient [default: 0.9]
    #[arg(long)]
    momentum: Option<f64>,
    /// Training epochs [default: 300]
    #[arg(long)]
    epochs: Option<usize>,
    /// LSTM hidden size [default: 8]
    #[arg(long)]
    hidden: Option<usize>,
    /// Uniform init half-width [default: 0.1]
    #[arg(long)]
    init_scale: Option<f64>,
    /// Gating mode: softmax or uniform [default: softmax]
    #[arg(long)]
    gate_mode: Option<String>,
    /// Active streams, comma-separated subset of
    /// text,comr,hifr,lico,moop [default: all]
    #[arg(long)]
    active: Option<String>,
    /// Pooling grid size [default: 4]
    #[arg(long)]
    grid: Option<usize>,
    /// Compression round-trip quality 1-100 [default: 50]
    #[arg(long)]
    quality: Option<u32>,
    /// High-pass radius [default: min(H,W)/8 per frame]
    #[arg(long)]
    hp_radius: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    seed: Option<u64>,
    lr: Option<f64>,
    momentum: Option<f64>,
    epochs: Option<usize>,
    hidden: Option<usize>,
    init_scale: Option<f64>,
    gate_mode: Option<String>,
    active: Option<String>,
    grid: Option<usize>,
    quality: Option<u32>,
    hp_radius: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset manifest (JSON Lines)
    #[arg(long)]
    manifest: PathBuf,
    /// Trained checkpoint path
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory for report.txt, report.csv, roc.csv
    #[arg(long)]
    out: PathBuf,
    /// TOML config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pooling grid size; must match training [default: 4]
    #[arg(long)]
    grid: Option<usize>,
    /// Compression round-trip quality; must match training [default: 50]
    #[arg(long)]
    quality: Option<u32>,
    /// High-pass radius; must match training
    /// [default: min(H,W)/8 per frame]
    #[arg(long)]
    hp_radius: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvalFile {
    grid: Option<usize>,
    quality: Option<u32>,
    hp_radius: Option<usize>,
}

fn load_config_file<T: Default + for<'de> Deserialize<'de>>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", p.display())))
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_mix(s: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::config(format!("bad mix value {p:?}"))))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err(CliError::config("mix needs exactly 4 proportions"));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

fn parse_gate_mode(s: &str) -> Result<GateMode, CliError> {
    match s {
        "softmax" => Ok(GateMode::Softmax),
        "uniform" => Ok(GateMode::Uniform),
        other => Err(CliError::config(format!("unknown gate mode {other:?}"))),
    }
}

fn parse_active(s: &str) -> Result<[bool; 5], CliError> {
    let mut active = [false; 5];
    for part in s.split(',') {
        let part = part.trim();
        let stream = Stream::ALL
            .into_iter()
            .find(|st| st.name() == part)
            .ok_or_else(|| CliError::config(format!("unknown stream {part:?}")))?;
        active[stream.index()] = true;
    }
    Ok(active)
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let file: GenFile = load_config_file(&args.config)?;
    let mix = match (&args.family, &args.mix) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("--family and --mix are mutually exclusive"))
        }
        (Some(f), None) => {
            let fam = Family::parse(f)?;
            let mut m = [0.0; 4];
            m[Family::ALL.iter().position(|x| *x == fam).unwrap()] = 1.0;
            m
        }
        (None, Some(m)) => parse_mix(m)?,
        (None, None) => match &file.mix {
            Some(v) if v.len() == 4 => [v[0], v[1], v[2], v[3]],
            Some(_) => return Err(CliError::config("config mix needs exactly 4 proportions")),
            None => match &file.family {
                Some(f) => {
                    let fam = Family::parse(f)?;
                    let mut m = [0.0; 4];
                    m[Family::ALL.iter().position(|x| *x == fam).unwrap()] = 1.0;
                    m
                }
                None => [0.25; 4],
            },
        },
    };
    let cfg = GenConfig {
        seed: args.seed.or(file.seed).unwrap_or(7),
        n_videos: args.videos.or(file.videos).unwrap_or(10),
        frames_per_video: args.frames.or(file.frames).unwrap_or(4),
        height: args.height.or(file.height).unwrap_or(64),
        width: args.width.or(file.width).unwrap_or(64),
        forgery_mix: mix,
        severity: args.severity.or(file.severity).unwrap_or(0.8),
        landmarks: args.landmarks || file.landmarks.unwrap_or(false),
    };
    let records = gen_dataset(&cfg, &args.out)?;
    println!(
        "wrote {} videos ({} frames) to {}",
        records.len(),
        records.iter().map(|r| r.frame_paths.len()).sum::<usize>(),
        args.out.display()
    );
    Ok(())
}

fn extract_config(
    grid: Option<usize>,
    quality: Option<u32>,
    hp_radius: Option<usize>,
) -> ExtractConfig {
    let d = ExtractConfig::default();
    ExtractConfig {
        grid: grid.unwrap_or(d.grid),
        quality: quality.unwrap_or(d.quality),
        hp_radius: hp_radius.or(d.hp_radius),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let file: ExtractFile = load_config_file(&args.config)?;
    let cfg = extract_config(
        args.grid.or(file.grid),
        args.quality.or(file.quality),
        args.hp_radius.or(file.hp_radius),
    );
    let dump_maps = args.dump_maps || file.dump_maps.unwrap_or(false);
    let dir = manifest_dir(&args.manifest);
    let records = read_manifest(&args.manifest)?;
    if records.is_empty() {
        return Err(CliError::config("manifest has no records"));
    }
    let missing: Vec<String> = records
        .iter()
        .flat_map(|r| r.frame_paths.iter())
        .filter(|p| !dir.join(p).exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CliError::io(format!("missing frames: {missing:?}")));
    }

    let mut csv = String::new();
    let mut header_done = false;
    let map_dir = args.out.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    for rec in &records {
        let frames = load_frames(rec, &dir)?;
        for (t, frame) in frames.iter().enumerate() {
            let bundle = extract_bundle(frame, &cfg)?;
            if !header_done {
                let mut cols = vec!["video_id".to_string(), "frame_index".into(), "label".into()];
                for v in bundle.vectors() {
                    for i in 0..v.values.len() {
                        cols.push(format!("{}_{i}", v.stream.name()));
                    }
                }
                csv.push_str(&cols.join(","));
                csv.push('\n');
                header_done = true;
            }
            let mut row = vec![rec.video_id.clone(), t.to_string(), rec.label.to_string()];
            for v in bundle.vectors() {
                row.extend(v.values.iter().map(|&x| fmt17(x)));
            }
            csv.push_str(&row.join(","));
            csv.push('\n');
            if dump_maps {
                dump_frame_maps(frame, &cfg, &map_dir, &rec.video_id, t)?;
            }
        }
    }
    fs::write(&args.out, csv)?;
    println!("wrote features for {} videos to {}", records.len(), args.out.display());
    Ok(())
}

/// Writes the four spatial feature maps of one frame as PGMs. Maps are
/// already in [0,1] by construction.
fn dump_frame_maps(
    frame: &ImageTensor,
    cfg: &ExtractConfig,
    dir: &Path,
    video_id: &str,
    t: usize,
) -> Result<(), CliError> {
    let quant = compression::QuantSpec::from_quality(cfg.quality)
        .map_err(|e| CliError::config(e.to_string()))?;
    let residual = compression::comr_features(frame, &quant)
        .map_err(|e| CliError::config(e.to_string()))?;
    let gray = crate::imagecore::to_grayscale(frame)?;
    let radius = cfg.hp_radius.unwrap_or_else(|| frame.height().min(frame.width()) / 8);
    let phase = spectral::phase_reconstruct(&gray, HighPassSpec { radius })
        .map_err(|e| CliError::config(e.to_string()))?;
    let maps = morphology::moop_features(frame)?;
    for (name, map) in [
        ("comr", &residual),
        ("hifr", &phase),
        ("moop_gradient", &maps.gradient),
        ("moop_residual", &maps.opening_residual),
    ] {
        write_pnm(map, dir.join(format!("{video_id}_{t:03}_{name}.pgm")))?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let file: TrainFile = load_config_file(&args.config)?;
    let ecfg = extract_config(
        args.grid.or(file.grid),
        args.quality.or(file.quality),
        args.hp_radius.or(file.hp_radius),
    );
    let defaults = TrainConfig::default();
    let gate_mode = match args.gate_mode.as_deref().or(file.gate_mode.as_deref()) {
        Some(s) => parse_gate_mode(s)?,
        None => defaults.gate_mode,
    };
    let active = match args.active.as_deref().or(file.active.as_deref()) {
        Some(s) => parse_active(s)?,
        None => defaults.active,
    };
    let tcfg = TrainConfig {
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        learning_rate: args.lr.or(file.lr).unwrap_or(defaults.learning_rate),
        momentum: args.momentum.or(file.momentum).unwrap_or(defaults.momentum),
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        hidden: args.hidden.or(file.hidden).unwrap_or(defaults.hidden),
        init_scale: args.init_scale.or(file.init_scale).unwrap_or(defaults.init_scale),
        gate_mode,
        active,
    };
    let data = load_sequences(&args.manifest, &ecfg)?;
    let out = train(&data, &tcfg)?;
    fs::create_dir_all(&args.out)?;
    save_checkpoint(&out.model, args.out.join("model.ckpt"))?;
    let mut loss_csv = String::from("epoch,loss\n");
    for (i, l) in out.loss_trace.iter().enumerate() {
        loss_csv.push_str(&format!("{},{}\n", i + 1, fmt17(*l)));
    }
    fs::write(args.out.join("loss.csv"), loss_csv)?;
    let final_loss = out.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained on {} videos for {} epochs, final loss {:.6}; checkpoint at {}",
        data.len(),
        tcfg.epochs,
        final_loss,
        args.out.join("model.ckpt").display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let file: EvalFile = load_config_file(&args.config)?;
    let ecfg = extract_config(
        args.grid.or(file.grid),
        args.quality.or(file.quality),
        args.hp_radius.or(file.hp_radius),
    );
    let model = load_checkpoint(&args.checkpoint)?;
    let data = load_sequences(&args.manifest, &ecfg)?;
    let mut samples = Vec::new();
    for seq in &data {
        let scores = frame_scores(seq, &model)?;
        for (t, s) in scores.iter().enumerate() {
            samples.push(ScoredSample {
                id: format!("{}:{t}", seq.video_id),
                score: *s,
                label: seq.label,
                video_id: seq.video_id.clone(),
            });
        }
    }
    let rep = report(&samples)?;
    fs::create_dir_all(&args.out)?;

    let txt = format!(
        "frame_auc  {:.6}\nvideo_auc  {:.6}\nap         {:.6}\neer        {:.6}\nn_pos      {}\nn_neg      {}\n",
        rep.frame_auc, rep.video_auc, rep.ap, rep.eer, rep.n_pos, rep.n_neg
    );
    fs::write(args.out.join("report.txt"), &txt)?;

    let mut csv = String::from("metric,value\n");
    csv.push_str(&format!("frame_auc,{}\n", fmt17(rep.frame_auc)));
    csv.push_str(&format!("video_auc,{}\n", fmt17(rep.video_auc)));
    csv.push_str(&format!("ap,{}\n", fmt17(rep.ap)));
    csv.push_str(&format!("eer,{}\n", fmt17(rep.eer)));
    csv.push_str(&format!("n_pos,{}\n", rep.n_pos));
    csv.push_str(&format!("n_neg,{}\n", rep.n_neg));
    fs::write(args.out.join("report.csv"), csv)?;

    let mut roc = String::from("fpr,tpr,threshold\n");
    for (fpr, tpr, thr) in &rep.roc {
        roc.push_str(&format!("{},{},{}\n", fmt17(*fpr), fmt17(*tpr), fmt17(*thr)));
    }
    fs::write(args.out.join("roc.csv"), roc)?;

    print!("{txt}");
    Ok(())
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            e.kind as i32
        }
    }
}
