use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::model::{ModelKind, Segmenter};
use super::overlay::render_overlay;
use crate::corpus::{load_manifest, save_mask, split_ids, ImageSample, LabeledImage, Spectrum, SplitSpec, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::eval::{aggregate, write_records_csv, AggregateResult, EvalRecord};
use crate::fcn::{build_fcn, train_fcn, FcnConfig, TrainOutputs};
use crate::gan::{build_gan, train_gan, GanConfig, GanOutputs};
use crate::mask::BinaryMask;
use crate::nn::Checkpoint;
use crate::roi::{
    crop_roi, roi_for, IrisDetector, RoiBox, RoiTransform, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_PAD_FRACTION,
};

/// Which samples an experiment trains and tests on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scope {
    Single(String),
    MergedNir,
    MergedVis,
    MergedAll,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Single(name) => write!(f, "single:{name}"),
            Scope::MergedNir => f.write_str("merged-nir"),
            Scope::MergedVis => f.write_str("merged-vis"),
            Scope::MergedAll => f.write_str("merged-all"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    /// `single:NAME` (or a bare dataset name), `merged-nir`, `merged-vis`,
    /// `merged-all`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "merged-nir" | "nir" => Ok(Scope::MergedNir),
            "merged-vis" | "vis" => Ok(Scope::MergedVis),
            "merged-all" | "all" => Ok(Scope::MergedAll),
            _ => {
                let name = s.strip_prefix("single:").unwrap_or(s);
                if name.is_empty() {
                    Err(Error::Config("empty dataset name in scope".into()))
                } else {
                    Ok(Scope::Single(name.to_string()))
                }
            }
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Scope {
    /// Samples in scope, in manifest order. Unknown dataset names and
    /// empty selections are configuration errors.
    pub fn select<'a>(&self, samples: &'a [ImageSample]) -> Result<Vec<&'a ImageSample>> {
        let chosen: Vec<&ImageSample> = samples
            .iter()
            .filter(|s| match self {
                Scope::Single(name) => &s.dataset == name,
                Scope::MergedNir => s.spectrum == Spectrum::Nir,
                Scope::MergedVis => s.spectrum == Spectrum::Vis,
                Scope::MergedAll => true,
            })
            .collect();
        if chosen.is_empty() {
            let known: std::collections::BTreeSet<&str> = samples.iter().map(|s| s.dataset.as_str()).collect();
            return Err(Error::Config(match self {
                Scope::Single(name) => format!("unknown dataset `{name}`; manifest has {known:?}"),
                other => format!("scope {other} selects no samples; manifest has {known:?}"),
            }));
        }
        Ok(chosen)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiOptions {
    pub detector_checkpoint: Option<PathBuf>,
    pub confidence_threshold: f64,
    pub pad_fraction: f64,
}

impl Default for RoiOptions {
    fn default() -> Self {
        Self {
            detector_checkpoint: None,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            pad_fraction: DEFAULT_PAD_FRACTION,
        }
    }
}

/// Everything one `run` needs. `iterations` and `seed` override the
/// values inside the model sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub model: ModelKind,
    pub scope: Scope,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Fixed train/test split (e.g. a dataset's official protocol) instead
    /// of a random one.
    #[serde(default)]
    pub split_file: Option<PathBuf>,
    pub iterations: usize,
    #[serde(default)]
    pub use_roi_stage: bool,
    #[serde(default)]
    pub roi: RoiOptions,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub fcn: FcnConfig,
    #[serde(default)]
    pub gan: GanConfig,
    /// Checkpoint whose `convS_I` tensors initialize the FCN encoder.
    #[serde(default)]
    pub pretrained_encoder: Option<PathBuf>,
}

fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

impl ExperimentConfig {
    pub fn new(manifest: impl Into<PathBuf>, model: ModelKind, output_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            manifest: manifest.into(),
            model,
            scope: Scope::MergedAll,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split_file: None,
            iterations: 32_000,
            use_roi_stage: false,
            roi: RoiOptions::default(),
            output_dir: output_dir.into(),
            seed,
            fcn: FcnConfig::default(),
            gan: GanConfig::default(),
            pretrained_encoder: None,
        }
    }

    /// Model sections with the run-level iteration count and seed applied.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        c.fcn.iterations = self.iterations;
        c.fcn.seed = self.seed;
        c.gan.iterations = self.iterations;
        c.gan.seed = self.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} must be in (0, 1)", self.train_fraction)));
        }
        if self.use_roi_stage && self.roi.detector_checkpoint.is_none() {
            return Err(Error::Config("the ROI stage needs a detector checkpoint".into()));
        }
        let e = self.effective();
        match self.model {
            ModelKind::Fcn => e.fcn.validate(),
            ModelKind::Gan => e.gan.validate(),
        }
    }
}

/// Aggregate over one dataset (or the pooled test set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    #[serde(flatten)]
    pub aggregate: AggregateResult,
}

pub const POOLED_ROW: &str = "pooled";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRef {
    pub sample_id: String,
    pub e: f64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: ModelKind,
    pub scope: Scope,
    pub seed: u64,
    pub iterations: usize,
    pub use_roi_stage: bool,
    pub train_size: usize,
    pub test_size: usize,
    /// One row per dataset in the test set, then the pooled row.
    pub rows: Vec<SummaryRow>,
    pub best: OverlayRef,
    pub worst: OverlayRef,
}

impl ExperimentSummary {
    pub fn pooled(&self) -> &AggregateResult {
        &self.rows.last().expect("pooled row present").aggregate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub config: PathBuf,
    pub split: PathBuf,
    pub checkpoint: PathBuf,
    pub loss_trace: PathBuf,
    pub records: PathBuf,
    pub summary: PathBuf,
    pub predictions_dir: PathBuf,
    pub rois: Option<PathBuf>,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            config: dir.join("config.json"),
            split: dir.join("split.json"),
            checkpoint: dir.join("model.ckpt"),
            loss_trace: dir.join("loss_trace.csv"),
            records: dir.join("records.csv"),
            summary: dir.join("summary.json"),
            predictions_dir: dir.join("predictions"),
            rois: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub records: Vec<EvalRecord>,
    pub artifacts: Artifacts,
}

/// Per-dataset split with the same seed, so merged scopes keep each
/// dataset's 80/20 proportion.
pub fn split_scope(samples: &[&ImageSample], seed: u64, train_fraction: f64) -> Result<SplitSpec> {
    let mut by_dataset: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in samples {
        by_dataset.entry(s.dataset.as_str()).or_default().push(s.id.as_str());
    }
    let mut train = std::collections::HashSet::new();
    for (dataset, ids) in &by_dataset {
        let spec = split_ids(ids, seed, train_fraction)
            .map_err(|e| Error::Validation(format!("dataset `{dataset}`: {e}")))?;
        train.extend(spec.train_ids);
    }
    let (train_ids, test_ids) = samples
        .iter()
        .map(|s| s.id.clone())
        .partition(|id| train.contains(id));
    Ok(SplitSpec {
        train_fraction,
        seed,
        train_ids,
        test_ids,
    })
}

/// Restricts a fixed split to the samples in scope; every in-scope sample
/// must be assigned.
fn restrict_split(spec: &SplitSpec, samples: &[&ImageSample]) -> Result<SplitSpec> {
    let train: std::collections::HashSet<&str> = spec.train_ids.iter().map(String::as_str).collect();
    let test: std::collections::HashSet<&str> = spec.test_ids.iter().map(String::as_str).collect();
    let mut out = SplitSpec {
        train_fraction: spec.train_fraction,
        seed: spec.seed,
        train_ids: Vec::new(),
        test_ids: Vec::new(),
    };
    let mut missing = Vec::new();
    for s in samples {
        match (train.contains(s.id.as_str()), test.contains(s.id.as_str())) {
            (true, false) => out.train_ids.push(s.id.clone()),
            (false, true) => out.test_ids.push(s.id.clone()),
            (true, true) => return Err(Error::Validation(format!("`{}` is in both train and test", s.id))),
            (false, false) => missing.push(s.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!("split file does not assign: {missing:?}")));
    }
    if out.train_ids.is_empty() || out.test_ids.is_empty() {
        return Err(Error::Validation("split leaves train or test empty for this scope".into()));
    }
    Ok(out)
}

/// A sample as the segmenter sees it: ROI crop (or full image) plus the
/// way back to full resolution.
struct Prepared {
    id: String,
    dataset: String,
    full_image: RgbImage,
    full_mask: BinaryMask,
    image: RgbImage,
    mask: BinaryMask,
    transform: Option<RoiTransform>,
    roi: Option<RoiBox>,
}

fn prepare(sample: &ImageSample, detector: Option<(&IrisDetector, &RoiOptions)>) -> Result<Prepared> {
    let full_image = sample.load_image()?;
    let full_mask = sample.load_mask()?;
    let (image, mask, transform, roi) = match detector {
        None => (full_image.clone(), full_mask.clone(), None, None),
        Some((det, opts)) => {
            let selection = det.best_detection(&full_image, opts.confidence_threshold);
            let roi = roi_for(&selection, (sample.width, sample.height), opts.pad_fraction)?;
            let (crop, t) = crop_roi(&full_image, &roi);
            (crop, t.crop_mask(&full_mask), Some(t), Some(roi))
        }
    };
    Ok(Prepared {
        id: sample.id.clone(),
        dataset: sample.dataset.clone(),
        full_image,
        full_mask,
        image,
        mask,
        transform,
        roi,
    })
}

/// Order-preserving map over `items` on all available cores.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Split, optional ROI stage, training, test-set scoring at full
/// resolution, and reports. Stage failures carry the stage name and, where
/// one is involved, the sample id.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let cfg = config.effective();
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut artifacts = Artifacts::in_dir(out);
    write_json(&artifacts.config, &cfg)?;

    let all = load_manifest(&cfg.manifest).map_err(|e| e.in_stage("manifest", None))?;
    let scoped = cfg.scope.select(&all)?;
    let split = match &cfg.split_file {
        Some(path) => restrict_split(&SplitSpec::load(path)?, &scoped),
        None => split_scope(&scoped, cfg.seed, cfg.train_fraction),
    }
    .map_err(|e| e.in_stage("split", None))?;
    split.save(&artifacts.split)?;
    let by_id: BTreeMap<&str, &ImageSample> = scoped.iter().map(|s| (s.id.as_str(), *s)).collect();

    let detector = match (&cfg.use_roi_stage, &cfg.roi.detector_checkpoint) {
        (true, Some(path)) => Some(IrisDetector::load(path).map_err(|e| e.in_stage("roi", None))?),
        _ => None,
    };
    let det_ref = detector.as_ref().map(|d| (d, &cfg.roi));
    let prep = |ids: &[String]| -> Result<Vec<Prepared>> {
        par_map(ids, |id| prepare(by_id[id.as_str()], det_ref).map_err(|e| e.in_stage("prepare", Some(id))))
            .into_iter()
            .collect()
    };
    let train = prep(&split.train_ids)?;
    let test = prep(&split.test_ids)?;
    if detector.is_some() {
        let path = out.join("rois.jsonl");
        let mut text = String::new();
        for p in train.iter().chain(&test) {
            let line = serde_json::json!({ "id": p.id, "roi": p.roi });
            text.push_str(&line.to_string());
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        artifacts.rois = Some(path);
    }

    let train_data: Vec<LabeledImage> = train
        .iter()
        .map(|p| LabeledImage {
            id: p.id.clone(),
            image: p.image.clone(),
            mask: p.mask.clone(),
        })
        .collect();
    let segmenter = train_model(&cfg, &train_data, &artifacts).map_err(|e| e.in_stage("train", None))?;
    segmenter.save(&artifacts.checkpoint)?;

    fs::create_dir_all(&artifacts.predictions_dir).map_err(|e| Error::io(&artifacts.predictions_dir, e))?;
    let scored: Vec<(BinaryMask, EvalRecord)> = par_map(&test, |p| -> Result<_> {
        let crop_pred = segmenter.predict(&p.image).map_err(|e| e.in_stage("predict", Some(&p.id)))?;
        let pred = match &p.transform {
            Some(t) => t.paste(&crop_pred),
            None => Ok(crop_pred),
        }
        .map_err(|e| e.in_stage("predict", Some(&p.id)))?;
        let record = EvalRecord::evaluate(&p.id, &pred, &p.full_mask).map_err(|e| e.in_stage("evaluate", Some(&p.id)))?;
        save_mask(&pred, &artifacts.predictions_dir.join(format!("{}.png", p.id)))?;
        Ok((pred, record))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let records: Vec<EvalRecord> = scored.iter().map(|(_, r)| r.clone()).collect();
    write_records_csv(&artifacts.records, &records)?;

    let mut rows = Vec::new();
    let mut datasets: Vec<&str> = test.iter().map(|p| p.dataset.as_str()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    for ds in datasets {
        let subset: Vec<EvalRecord> = test
            .iter()
            .zip(&records)
            .filter(|(p, _)| p.dataset == ds)
            .map(|(_, r)| r.clone())
            .collect();
        rows.push(SummaryRow {
            dataset: ds.to_string(),
            aggregate: aggregate(&subset)?,
        });
    }
    rows.push(SummaryRow {
        dataset: POOLED_ROW.into(),
        aggregate: aggregate(&records)?,
    });

    // Best and worst by E; ties go to the earlier test sample.
    let mut best = 0;
    let mut worst = 0;
    for (i, r) in records.iter().enumerate() {
        if r.e < records[best].e {
            best = i;
        }
        if r.e > records[worst].e {
            worst = i;
        }
    }
    let overlay = |i: usize, tag: &str| -> Result<OverlayRef> {
        let p = &test[i];
        let img = render_overlay(&p.full_image, &scored[i].0, &p.full_mask).map_err(|e| e.in_stage("overlay", Some(&p.id)))?;
        let path = out.join(format!("overlay_{tag}.png"));
        img.save(&path).map_err(|e| Error::image(&path, e))?;
        Ok(OverlayRef {
            sample_id: p.id.clone(),
            e: records[i].e,
            path,
        })
    };
    let summary = ExperimentSummary {
        model: cfg.model,
        scope: cfg.scope.clone(),
        seed: cfg.seed,
        iterations: cfg.iterations,
        use_roi_stage: cfg.use_roi_stage,
        train_size: train.len(),
        test_size: test.len(),
        rows,
        best: overlay(best, "best")?,
        worst: overlay(worst, "worst")?,
    };
    write_json(&artifacts.summary, &summary)?;
    Ok(ExperimentReport {
        summary,
        records,
        artifacts,
    })
}

fn train_model(cfg: &ExperimentConfig, data: &[LabeledImage], artifacts: &Artifacts) -> Result<Segmenter> {
    match cfg.model {
        ModelKind::Fcn => {
            let pretrained = match &cfg.pretrained_encoder {
                Some(path) => Some(Checkpoint::load(path)?.tensors),
                None => None,
            };
            let mut model = build_fcn(&cfg.fcn, pretrained.as_deref())?;
            train_fcn(
                &mut model,
                data,
                &TrainOutputs {
                    checkpoint: Some(artifacts.checkpoint.clone()),
                    loss_trace: Some(artifacts.loss_trace.clone()),
                },
            )?;
            Ok(Segmenter::Fcn(model))
        }
        ModelKind::Gan => {
            let mut state = build_gan(&cfg.gan)?;
            train_gan(
                &mut state,
                data,
                &GanOutputs {
                    checkpoint: Some(artifacts.checkpoint.clone()),
                    loss_trace: Some(artifacts.loss_trace.clone()),
                },
            )?;
            Ok(Segmenter::Gan(state))
        }
    }
}
