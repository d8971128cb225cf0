use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irisseg_core::corpus::{load_labeled, load_manifest, load_mask, load_rgb, save_mask, ImageSample, Spectrum, SplitSpec};
use irisseg_core::eval::{aggregate, read_records_csv, write_records_csv, EvalRecord};
use irisseg_core::fcn::{build_fcn, train_fcn, FcnConfig, TrainOutputs};
use irisseg_core::gan::{build_gan, train_gan, GanConfig, GanOutputs};
use irisseg_core::nn::Checkpoint;
use irisseg_core::pipeline::{
    compare_methods_at, generate_synthetic, render_overlay, run_experiment, split_scope, ExperimentConfig, ModelKind,
    Scope, Segmenter, SynthOptions,
};
use irisseg_core::roi::{DetectorConfig, DetectorExample, DetectorTrainConfig, IrisDetector};

#[derive(Parser)]
#[command(name = "irisseg", version, about = "Iris segmentation: FCN and conditional GAN, with ROI detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic eye-image dataset with exact masks.
    Synth(SynthArgs),
    /// Write a seeded train/test split of a manifest.
    Split(SplitArgs),
    /// Train the single-class iris detector.
    TrainDetector(TrainDetectorArgs),
    /// Train a segmenter on a manifest (train side of a split, if given).
    Train(TrainArgs),
    /// Predict masks with a trained segmenter.
    Predict(PredictArgs),
    /// Score predicted masks against the manifest's ground truth.
    Evaluate(EvaluateArgs),
    /// Paired t-tests between two per-image record files.
    Compare(CompareArgs),
    /// Paint false positives green and false negatives red.
    Overlay(OverlayArgs),
    /// Full experiment: split, (ROI), train, evaluate, report.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    count: usize,
    #[arg(long, default_value_t = 128)]
    side: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Dataset labels as NAME:SPECTRUM, assigned round-robin.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long)]
    eyelid_probability: Option<f64>,
}

#[derive(Args)]
struct ScopeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// single:NAME, merged-nir, merged-vis or merged-all.
    #[arg(long, default_value = "merged-all")]
    scope: String,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainDetectorArgs {
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    #[arg(long, default_value_t = 1)]
    width_divisor: usize,
    #[arg(long, default_value_t = 4000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// TOML file with `[fcn]` / `[gan]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    loss_trace: Option<PathBuf>,
    /// Checkpoint providing `convS_I` encoder tensors (FCN only).
    #[arg(long)]
    pretrained_encoder: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Single image to segment; use with `--out`.
    #[arg(long, conflicts_with = "manifest")]
    image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    out: Option<PathBuf>,
    /// Segment every sample of a manifest (optionally only a split's test side).
    #[arg(long, requires = "out_dir")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of `<id>.png` predicted masks.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long)]
    scope: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    use_roi_stage: bool,
    #[arg(long)]
    detector: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: irisseg_core::Error| e.to_string())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Split(a) => split(a),
        Command::TrainDetector(a) => train_detector(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Overlay(a) => overlay(a),
        Command::Run(a) => run(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut opts = SynthOptions::new(a.count, a.side, a.seed);
    if !a.datasets.is_empty() {
        opts.datasets = a
            .datasets
            .iter()
            .map(|d| {
                let (name, spectrum) = d.split_once(':').with_context(|| format!("`{d}` is not NAME:SPECTRUM"))?;
                Ok((name.to_string(), spectrum.parse::<Spectrum>()?))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(p) = a.eyelid_probability {
        opts.eyelid_probability = p;
    }
    let manifest = generate_synthetic(&opts, &a.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn scoped(args: &ScopeArgs) -> Result<Vec<ImageSample>> {
    let samples = load_manifest(&args.manifest)?;
    let scope: Scope = args.scope.parse()?;
    Ok(scope.select(&samples)?.into_iter().cloned().collect())
}

/// Samples on the train side of `split_file`, or all of them.
fn train_side(samples: Vec<ImageSample>, split_file: Option<&Path>) -> Result<Vec<ImageSample>> {
    match split_file {
        None => Ok(samples),
        Some(path) => {
            let spec = SplitSpec::load(path)?;
            Ok(samples.into_iter().filter(|s| spec.train_ids.contains(&s.id)).collect())
        }
    }
}

fn split(a: SplitArgs) -> Result<()> {
    let samples = scoped(&a.scope)?;
    let refs: Vec<&ImageSample> = samples.iter().collect();
    let spec = split_scope(&refs, a.seed, a.train_fraction)?;
    spec.save(&a.out)?;
    println!("train {} / test {}", spec.train_ids.len(), spec.test_ids.len());
    Ok(())
}

fn train_detector(a: TrainDetectorArgs) -> Result<()> {
    let samples = train_side(scoped(&a.scope)?, a.split_file.as_deref())?;
    let examples = DetectorExample::from_samples(&samples, a.channels)?;
    let mut det = IrisDetector::new(DetectorConfig {
        width_divisor: a.width_divisor,
        seed: a.seed,
        ..DetectorConfig::new(a.channels)
    })?;
    let cfg = DetectorTrainConfig {
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        checkpoint_path: Some(a.out.clone()),
        ..DetectorTrainConfig::default()
    };
    let trace = irisseg_core::roi::train_detector(&mut det, &examples, &cfg)?;
    log::info!("final detector loss {:.4}", trace.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

#[derive(serde::Deserialize, Default)]
#[serde(default)]
struct ModelSections {
    fcn: FcnConfig,
    gan: GanConfig,
}

fn train(a: TrainArgs) -> Result<()> {
    let sections: ModelSections = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ModelSections::default(),
    };
    let samples = train_side(scoped(&a.scope)?, a.split_file.as_deref())?;
    let data = load_labeled(&samples)?;
    match a.model {
        ModelKind::Fcn => {
            let mut cfg = sections.fcn;
            cfg.iterations = a.iterations.unwrap_or(cfg.iterations);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let pretrained = match &a.pretrained_encoder {
                Some(p) => Some(Checkpoint::load(p)?.tensors),
                None => None,
            };
            let mut model = build_fcn(&cfg, pretrained.as_deref())?;
            train_fcn(
                &mut model,
                &data,
                &TrainOutputs {
                    checkpoint: Some(a.out.clone()),
                    loss_trace: a.loss_trace.clone(),
                },
            )?;
        }
        ModelKind::Gan => {
            let mut cfg = sections.gan;
            cfg.iterations = a.iterations.unwrap_or(cfg.iterations);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let mut state = build_gan(&cfg)?;
            train_gan(
                &mut state,
                &data,
                &GanOutputs {
                    checkpoint: Some(a.out.clone()),
                    loss_trace: a.loss_trace.clone(),
                },
            )?;
        }
    }
    println!("{}", a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = Segmenter::load(&a.checkpoint)?;
    if let (Some(image), Some(out)) = (&a.image, &a.out) {
        save_mask(&model.predict(&load_rgb(image)?)?, out)?;
        return Ok(());
    }
    let (Some(manifest), Some(out_dir)) = (&a.manifest, &a.out_dir) else {
        bail!("give either --image/--out or --manifest/--out-dir");
    };
    let mut samples = load_manifest(manifest)?;
    if let Some(path) = &a.split_file {
        let spec = SplitSpec::load(path)?;
        samples.retain(|s| spec.test_ids.contains(&s.id));
    }
    fs::create_dir_all(out_dir)?;
    for s in &samples {
        let mask = model.predict(&s.load_image()?).with_context(|| format!("sample {}", s.id))?;
        save_mask(&mask, &out_dir.join(format!("{}.png", s.id)))?;
    }
    println!("{} masks written to {}", samples.len(), out_dir.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut samples = load_manifest(&a.manifest)?;
    if let Some(path) = &a.split_file {
        let spec = SplitSpec::load(path)?;
        samples.retain(|s| spec.test_ids.contains(&s.id));
    }
    let records = samples
        .iter()
        .map(|s| {
            let pred = load_mask(&a.predictions.join(format!("{}.png", s.id)))?;
            Ok(EvalRecord::evaluate(&s.id, &pred, &s.load_mask()?)?)
        })
        .collect::<Result<Vec<_>>>()?;
    write_records_csv(&a.out, &records)?;
    let agg = aggregate(&records)?;
    println!(
        "n={} E={:.4}±{:.4} F1={:.4}±{:.4} undefined_f1={}",
        agg.n,
        agg.mean_e,
        agg.std_e,
        agg.mean_f1,
        agg.std_f1,
        agg.undefined_f1.len()
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let ra = read_records_csv(&a.a)?;
    let rb = read_records_csv(&a.b)?;
    let cmp = compare_methods_at(&ra, &rb, a.alpha)?;
    println!("{}", serde_json::to_string_pretty(&cmp)?);
    Ok(())
}

fn overlay(a: OverlayArgs) -> Result<()> {
    let img = render_overlay(&load_rgb(&a.image)?, &load_mask(&a.pred)?, &load_mask(&a.truth)?)?;
    img.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

/// Loads the TOML file (if any), applies flag overrides, and checks the
/// required keys are present.
fn experiment_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut table: toml::Table = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => toml::Table::new(),
    };
    let base = a.config.as_deref().and_then(Path::parent).map(Path::to_path_buf);
    let mut set = |key: &str, value: toml::Value| {
        table.insert(key.to_string(), value);
    };
    let path_value = |p: &Path| toml::Value::String(p.to_string_lossy().into_owned());
    if let Some(v) = &a.manifest {
        set("manifest", path_value(v));
    }
    if let Some(v) = a.model {
        set("model", toml::Value::String(v.to_string()));
    }
    if let Some(v) = &a.scope {
        set("scope", toml::Value::String(v.clone()));
    }
    if let Some(v) = a.train_fraction {
        set("train_fraction", toml::Value::Float(v));
    }
    if let Some(v) = &a.split_file {
        set("split_file", path_value(v));
    }
    if let Some(v) = a.iterations {
        set("iterations", toml::Value::Integer(v as i64));
    }
    if a.use_roi_stage {
        set("use_roi_stage", toml::Value::Boolean(true));
    }
    if let Some(v) = &a.output_dir {
        set("output_dir", path_value(v));
    }
    set("seed", toml::Value::Integer(a.seed as i64));
    if let Some(v) = &a.detector {
        let roi = table
            .entry("roi")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = roi {
            t.insert("detector_checkpoint".into(), path_value(v));
        }
    }
    if !table.contains_key("scope") {
        table.insert("scope".into(), toml::Value::String("merged-all".into()));
    }
    let mut cfg: ExperimentConfig = table.try_into().context("invalid experiment configuration")?;
    // Relative paths in a config file are relative to that file.
    if let Some(base) = base {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if a.manifest.is_none() {
            fix(&mut cfg.manifest);
        }
        if a.output_dir.is_none() {
            fix(&mut cfg.output_dir);
        }
        if a.split_file.is_none() {
            if let Some(p) = cfg.split_file.as_mut() {
                fix(p);
            }
        }
        if a.detector.is_none() {
            if let Some(p) = cfg.roi.detector_checkpoint.as_mut() {
                fix(p);
            }
        }
    }
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    let report = run_experiment(&cfg)?;
    for row in &report.summary.rows {
        let g = &row.aggregate;
        println!(
            "{:<16} n={:<4} E={:.4}±{:.4} F1={:.4}±{:.4}",
            row.dataset, g.n, g.mean_e, g.std_e, g.mean_f1, g.std_f1
        );
    }
    println!("report: {}", report.artifacts.summary.display());
    Ok(())
}
