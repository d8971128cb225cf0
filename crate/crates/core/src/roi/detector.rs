//! Fast-YOLO style single-class iris detector.
//!
//! Backbone: nine 3x3 convolutions interleaved with six 2x2 max-pools
//! (the sixth with stride 1), then a 1x1 convolution to 30 channels on a
//! 13x13 grid: 5 anchors x (tx, ty, tw, th, objectness, class).

use std::path::PathBuf;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{BBox, Detection};
use crate::corpus::{rgb_to_tensor, ImageSample};
use crate::error::{Error, Result};
use crate::imaging::{luminance, resize_bilinear};
use crate::mask::BinaryMask;
use crate::nn::{
    self, Activation, Adam, AdamConfig, Checkpoint, Conv2d, Init, MaxPool2d, Module, NnRng, Sequential, Tensor,
};

pub const DETECTOR_INPUT: usize = 416;
pub const GRID: usize = 13;
pub const NUM_ANCHORS: usize = 5;
const VALUES_PER_ANCHOR: usize = 6;
pub const OUTPUT_CHANNELS: usize = NUM_ANCHORS * VALUES_PER_ANCHOR;
pub const DETECTOR_KIND: &str = "iris-detector";

const CONV_FILTERS: [usize; 8] = [16, 32, 64, 128, 256, 512, 1024, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv { filters: usize, size: usize, stride: usize },
    MaxPool { size: usize, stride: usize },
    Detection,
}

/// One row of the architecture table; shapes are `(height, width, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub index: usize,
    pub kind: LayerKind,
    pub input: (usize, usize, usize),
    pub output: (usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl DetectorSpec {
    /// Layer table for `input_channels` in {1, 3}. `width_divisor` shrinks
    /// every hidden filter count (1 reproduces the reference widths); the
    /// 30-channel output layer is unaffected.
    pub fn new(input_channels: usize, width_divisor: usize) -> Result<Self> {
        if input_channels != 1 && input_channels != 3 {
            return Err(Error::Config(format!(
                "detector input must have 1 or 3 channels, got {input_channels}"
            )));
        }
        if width_divisor == 0 {
            return Err(Error::Config("width divisor must be >= 1".into()));
        }
        let mut layers = Vec::new();
        let mut shape = (DETECTOR_INPUT, DETECTOR_INPUT, input_channels);
        let mut push = |kind: LayerKind, shape: &mut (usize, usize, usize)| {
            let input = *shape;
            let output = match kind {
                LayerKind::Conv { filters, .. } => (input.0, input.1, filters),
                LayerKind::MaxPool { stride, .. } => (input.0.div_ceil(stride), input.1.div_ceil(stride), input.2),
                LayerKind::Detection => input,
            };
            layers.push(LayerSpec {
                index: layers.len(),
                kind,
                input,
                output,
            });
            *shape = output;
        };
        let conv = |f: usize| LayerKind::Conv {
            filters: (f / width_divisor).max(1),
            size: 3,
            stride: 1,
        };
        for (i, &f) in CONV_FILTERS[..6].iter().enumerate() {
            push(conv(f), &mut shape);
            let stride = if i < 5 { 2 } else { 1 };
            push(LayerKind::MaxPool { size: 2, stride }, &mut shape);
        }
        push(conv(CONV_FILTERS[6]), &mut shape);
        push(conv(CONV_FILTERS[7]), &mut shape);
        push(
            LayerKind::Conv {
                filters: OUTPUT_CHANNELS,
                size: 1,
                stride: 1,
            },
            &mut shape,
        );
        push(LayerKind::Detection, &mut shape);
        Ok(Self { input_channels, layers })
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        self.layers.last().expect("non-empty").output
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub input_channels: usize,
    pub width_divisor: usize,
    /// Anchor priors `(width, height)` in grid cells.
    pub anchors: Vec<[f64; 2]>,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl DetectorConfig {
    pub fn new(input_channels: usize) -> Self {
        Self {
            input_channels,
            width_divisor: 1,
            // Generic priors, replaced by k-means over the training boxes.
            anchors: vec![[1.08, 1.19], [3.42, 4.41], [6.63, 11.38], [9.42, 5.11], [16.62, 10.52]],
            leaky_slope: 0.1,
            seed: 0,
        }
    }
}

pub struct IrisDetector {
    config: DetectorConfig,
    spec: DetectorSpec,
    net: Sequential<f32>,
}

impl IrisDetector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        let spec = DetectorSpec::new(config.input_channels, config.width_divisor)?;
        if config.anchors.len() != NUM_ANCHORS {
            return Err(Error::Config(format!("detector needs {NUM_ANCHORS} anchors")));
        }
        let mut rng = NnRng::seed_from_u64(config.seed);
        let mut net = Sequential::new();
        let mut channels = config.input_channels;
        let mut conv_index = 0;
        for layer in &spec.layers {
            match layer.kind {
                LayerKind::Conv { filters, size, stride } => {
                    let last = filters == OUTPUT_CHANNELS && size == 1;
                    let init = if last {
                        Init::Normal(0.01)
                    } else {
                        Init::He { slope: config.leaky_slope }
                    };
                    let name = format!("conv{conv_index}");
                    net.push(Conv2d::new(&name, channels, filters, size, stride, size / 2, init, &mut rng));
                    if !last {
                        net.push(Activation::leaky(config.leaky_slope));
                    }
                    channels = filters;
                    conv_index += 1;
                }
                LayerKind::MaxPool { size, stride } => {
                    net.push(if stride == size {
                        MaxPool2d::new(size, stride)
                    } else {
                        MaxPool2d::same(size, stride)
                    });
                }
                LayerKind::Detection => {}
            }
        }
        Ok(Self { config, spec, net })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    /// Raw `30 x 13 x 13` head output for a preprocessed `416 x 416` input.
    pub fn forward_raw(&self, input: &Tensor<f32>) -> Tensor<f32> {
        self.net.forward(input)
    }

    /// Resizes to the network input and encodes pixels as `v / 255 - 0.5`.
    pub fn preprocess(&self, img: &RgbImage) -> Tensor<f32> {
        preprocess(img, self.config.input_channels)
    }

    /// Every anchor box on the grid, mapped to `img` coordinates.
    pub fn detect(&self, img: &RgbImage) -> Vec<Detection> {
        let raw = self.forward_raw(&self.preprocess(img));
        decode(&raw, &self.config.anchors, (img.width() as usize, img.height() as usize))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: DETECTOR_KIND.into(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tensors: nn::export_params(&self.net),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(DETECTOR_KIND)?;
        let config: DetectorConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Checkpoint(format!("detector config: {e}")))?;
        let mut det = Self::new(config)?;
        nn::import_params(&mut det.net, &ckpt.tensors)?;
        Ok(det)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

pub(crate) fn preprocess(img: &RgbImage, channels: usize) -> Tensor<f32> {
    let t = if channels == 1 {
        luminance(img).map(|v| v / 255.0 - 0.5)
    } else {
        rgb_to_tensor(img)
    };
    resize_bilinear(&t, DETECTOR_INPUT, DETECTOR_INPUT)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn channel_index(anchor: usize, value: usize, gy: usize, gx: usize) -> usize {
    ((anchor * VALUES_PER_ANCHOR + value) * GRID + gy) * GRID + gx
}

/// Grid output to boxes on an image of `image_size`. With a single class
/// the class probability is 1, so confidence is the objectness.
fn decode(raw: &Tensor<f32>, anchors: &[[f64; 2]], image_size: (usize, usize)) -> Vec<Detection> {
    let data = raw.data();
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let g = GRID as f64;
    let mut out = Vec::with_capacity(NUM_ANCHORS * GRID * GRID);
    for (a, anchor) in anchors.iter().enumerate() {
        for gy in 0..GRID {
            for gx in 0..GRID {
                let v = |k: usize| data[channel_index(a, k, gy, gx)] as f64;
                let cx = (gx as f64 + sigmoid(v(0))) / g;
                let cy = (gy as f64 + sigmoid(v(1))) / g;
                let bw = anchor[0] * v(2).min(10.0).exp() / g;
                let bh = anchor[1] * v(3).min(10.0).exp() / g;
                let bbox = BBox::new((cx - bw / 2.0) * w, (cy - bh / 2.0) * h, (cx + bw / 2.0) * w, (cy + bh / 2.0) * h)
                    .clamp_to(image_size.0, image_size.1);
                if bbox.width() <= 0.0 || bbox.height() <= 0.0 {
                    continue;
                }
                out.push(Detection {
                    bbox,
                    confidence: sigmoid(v(4)),
                });
            }
        }
    }
    out
}

/// Tight bounding box of a mask's iris pixels.
pub fn derive_box(mask: &BinaryMask) -> Option<BBox> {
    mask.bounding_box()
        .map(|(x0, y0, x1, y1)| BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64))
}

/// One training image for the detector.
#[derive(Debug, Clone)]
pub struct DetectorExample {
    pub id: String,
    /// Preprocessed network input.
    pub input: Tensor<f32>,
    /// Ground-truth box on the original image.
    pub truth: BBox,
    pub image_size: (usize, usize),
}

impl DetectorExample {
    pub fn new(id: impl Into<String>, img: &RgbImage, truth: BBox, channels: usize) -> Self {
        Self {
            id: id.into(),
            input: preprocess(img, channels),
            truth,
            image_size: (img.width() as usize, img.height() as usize),
        }
    }

    /// Loads every sample; boxes come from the manifest annotation or, when
    /// absent, from the mask. Samples with neither are reported together.
    pub fn from_samples(samples: &[ImageSample], channels: usize) -> Result<Vec<Self>> {
        if samples.is_empty() {
            return Err(Error::Validation("detector training set is empty".into()));
        }
        let unusable: Vec<&str> = samples
            .iter()
            .filter(|s| s.roi_box.is_none() && s.mask_path.is_none())
            .map(|s| s.id.as_str())
            .collect();
        if !unusable.is_empty() {
            return Err(Error::Validation(format!(
                "samples without box annotation or mask: {unusable:?}"
            )));
        }
        let mut out = Vec::with_capacity(samples.len());
        let mut empty = Vec::new();
        for s in samples {
            let truth = match s.roi_box {
                Some(b) => BBox::new(b.x_min, b.y_min, b.x_max, b.y_max),
                None => match derive_box(&s.load_mask()?) {
                    Some(b) => b,
                    None => {
                        empty.push(s.id.clone());
                        continue;
                    }
                },
            };
            out.push(Self::new(&s.id, &s.load_image()?, truth, channels));
        }
        if !empty.is_empty() {
            return Err(Error::Validation(format!("samples whose mask has no iris pixels: {empty:?}")));
        }
        Ok(out)
    }

    /// Truth box as fractions of the image: `(cx, cy, w, h)`.
    fn normalized(&self) -> (f64, f64, f64, f64) {
        let (w, h) = (self.image_size.0 as f64, self.image_size.1 as f64);
        let b = &self.truth;
        (
            (b.x_min + b.x_max) / 2.0 / w,
            (b.y_min + b.y_max) / 2.0 / h,
            b.width() / w,
            b.height() / h,
        )
    }
}

/// IoU of two boxes sharing a center, given as `(w, h)`.
fn shape_iou(a: [f64; 2], b: [f64; 2]) -> f64 {
    let inter = a[0].min(b[0]) * a[1].min(b[1]);
    inter / (a[0] * a[1] + b[0] * b[1] - inter)
}

/// k-means over box shapes with `1 - IoU` distance. Deterministic: seeds
/// are area quantiles, empty clusters keep their previous center. Result is
/// sorted by area.
pub fn anchor_kmeans(shapes: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    assert!(!shapes.is_empty() && k > 0);
    let mut sorted = shapes.to_vec();
    sorted.sort_by(|a, b| (a[0] * a[1]).total_cmp(&(b[0] * b[1])));
    let mut centers: Vec<[f64; 2]> = (0..k)
        .map(|i| sorted[((2 * i + 1) * sorted.len()) / (2 * k)])
        .collect();
    for _ in 0..100 {
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for s in shapes {
            let best = (0..k)
                .max_by(|&i, &j| shape_iou(*s, centers[i]).total_cmp(&shape_iou(*s, centers[j])).then(j.cmp(&i)))
                .expect("k > 0");
            sums[best][0] += s[0];
            sums[best][1] += s[1];
            counts[best] += 1;
        }
        let mut moved = false;
        for i in 0..k {
            if counts[i] > 0 {
                let c = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
                moved |= c != centers[i];
                centers[i] = c;
            }
        }
        if !moved {
            break;
        }
    }
    centers.sort_by(|a, b| (a[0] * a[1]).total_cmp(&(b[0] * b[1])));
    centers
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorTrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub coord_weight: f64,
    pub object_weight: f64,
    pub no_object_weight: f64,
    /// Predictions overlapping the truth above this IoU are not pushed
    /// towards "no object".
    pub ignore_iou: f64,
    pub checkpoint_path: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 4000,
            learning_rate: 1e-3,
            seed: 0,
            coord_weight: 1.0,
            object_weight: 5.0,
            no_object_weight: 1.0,
            ignore_iou: 0.6,
            checkpoint_path: None,
            checkpoint_every: 1000,
        }
    }
}

impl IrisDetector {
    /// Detection loss for one example and its gradient w.r.t. the raw head.
    fn loss_and_grad(&self, raw: &Tensor<f32>, ex: &DetectorExample, cfg: &DetectorTrainConfig) -> (f64, Tensor<f32>) {
        let (cx, cy, bw, bh) = ex.normalized();
        let g = GRID as f64;
        let gx = ((cx * g).floor() as usize).min(GRID - 1);
        let gy = ((cy * g).floor() as usize).min(GRID - 1);
        let truth_shape = [bw * g, bh * g];
        let anchors = &self.config.anchors;
        let best = (0..NUM_ANCHORS)
            .max_by(|&i, &j| shape_iou(truth_shape, anchors[i]).total_cmp(&shape_iou(truth_shape, anchors[j])).then(j.cmp(&i)))
            .expect("anchors");
        let data = raw.data();
        let mut grad = vec![0f32; raw.len()];
        let mut loss = 0.0;
        let truth_norm = BBox::new(cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0);
        // d/dt (sigmoid(t) - y)^2
        let sq_sig = |t: f64, y: f64, weight: f64| {
            let s = sigmoid(t);
            (weight * (s - y) * (s - y), weight * 2.0 * (s - y) * s * (1.0 - s))
        };
        for (a, anchor) in anchors.iter().enumerate() {
            for cy_i in 0..GRID {
                for cx_i in 0..GRID {
                    let idx = |k: usize| channel_index(a, k, cy_i, cx_i);
                    let t = |k: usize| data[idx(k)] as f64;
                    if a == best && cy_i == gy && cx_i == gx {
                        let scale = cfg.coord_weight * (2.0 - bw * bh);
                        for (k, target) in [(0, cx * g - gx as f64), (1, cy * g - gy as f64)] {
                            let (l, d) = sq_sig(t(k), target, scale);
                            loss += l;
                            grad[idx(k)] = d as f32;
                        }
                        for (k, target) in [(2, (truth_shape[0] / anchor[0]).ln()), (3, (truth_shape[1] / anchor[1]).ln())] {
                            let diff = t(k) - target;
                            loss += scale * diff * diff;
                            grad[idx(k)] = (scale * 2.0 * diff) as f32;
                        }
                        let (l, d) = sq_sig(t(4), 1.0, cfg.object_weight);
                        loss += l;
                        grad[idx(4)] = d as f32;
                    } else {
                        let pcx = (cx_i as f64 + sigmoid(t(0))) / g;
                        let pcy = (cy_i as f64 + sigmoid(t(1))) / g;
                        let pw = anchor[0] * t(2).min(10.0).exp() / g;
                        let ph = anchor[1] * t(3).min(10.0).exp() / g;
                        let pred = BBox::new(pcx - pw / 2.0, pcy - ph / 2.0, pcx + pw / 2.0, pcy + ph / 2.0);
                        if pred.iou(&truth_norm) <= cfg.ignore_iou {
                            let (l, d) = sq_sig(t(4), 0.0, cfg.no_object_weight);
                            loss += l;
                            grad[idx(4)] = d as f32;
                        }
                    }
                }
            }
        }
        let (c, h, w) = raw.shape();
        (loss, Tensor::from_vec(c, h, w, grad))
    }

    /// Mean detection loss over `examples`, without updating anything.
    pub fn evaluate_loss(&self, examples: &[DetectorExample], cfg: &DetectorTrainConfig) -> f64 {
        examples
            .iter()
            .map(|ex| self.loss_and_grad(&self.forward_raw(&ex.input), ex, cfg).0)
            .sum::<f64>()
            / examples.len().max(1) as f64
    }

    /// Most confident detection on `img` that clears `threshold`.
    pub fn best_detection(&self, img: &RgbImage, threshold: f64) -> super::Selection {
        super::select_detection(&self.detect(img), threshold)
    }
}

/// Trains `model` with Adam, one image per step, cycling through a seeded
/// shuffle of `examples`. Anchors are first refit to the training boxes.
/// Returns the per-step loss trace.
pub fn train_detector(
    model: &mut IrisDetector,
    examples: &[DetectorExample],
    cfg: &DetectorTrainConfig,
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::Validation("detector training set is empty".into()));
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be >= 1".into()));
    }
    let shapes: Vec<[f64; 2]> = examples
        .iter()
        .map(|ex| {
            let (_, _, w, h) = ex.normalized();
            [w * GRID as f64, h * GRID as f64]
        })
        .collect();
    model.config.anchors = anchor_kmeans(&shapes, NUM_ANCHORS);

    let mut rng = NnRng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        weight_decay: 5e-4,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        if it % examples.len() == 0 {
            order.shuffle(&mut rng);
        }
        let ex = &examples[order[it % examples.len()]];
        let raw = model.net.forward_train(&ex.input, &mut rng);
        let (loss, grad) = model.loss_and_grad(&raw, ex, cfg);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                message: format!("detector loss {loss}"),
            });
        }
        model.net.backward(&grad);
        adam.step(&mut model.net);
        trace.push(loss);
        if let Some(path) = &cfg.checkpoint_path {
            if (it + 1) % cfg.checkpoint_every.max(1) == 0 || it + 1 == cfg.iterations {
                model.save(path)?;
            }
        }
    }
    Ok(trace)
}
