//! FCN-8s style segmenter: a 13-convolution VGG encoder, the two fully
//! connected layers recast as 1x1 convolutions, and three transposed
//! convolutions (x2, x2, x8) fused with 1x1 projections of pool-4 and
//! pool-3 features.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{rgb_to_tensor, LabeledImage};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::nn::{
    self, softmax_cross_entropy, Activation, Adam, AdamConfig, Checkpoint, Conv2d, ConvTranspose2d, Dropout, Init,
    MaxPool2d, Module, NamedTensor, NnRng, Param, Real, Sequential, Tensor,
};
use crate::trace::write_trace;

pub const FCN_KIND: &str = "fcn";
/// Total downsampling of the encoder; inputs must be multiples of this.
pub const FCN_STRIDE: usize = 32;

const VGG_STAGES: [(usize, usize); 5] = [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcnConfig {
    pub learning_rate: f64,
    pub dropout_probability: f64,
    pub weight_decay: f64,
    pub skip_init_std: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub num_classes: usize,
    /// Divides every encoder width (64..512). 1 is the VGG-16 topology.
    pub width_divisor: usize,
    /// Channels of the two 1x1 head layers (4096 in VGG-16).
    pub head_width: usize,
    pub seed: u64,
    /// Loss is recorded every `log_every` steps.
    pub log_every: usize,
    pub checkpoint_every: usize,
}

impl Default for FcnConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            dropout_probability: 0.5,
            weight_decay: 5e-4,
            skip_init_std: 1e-4,
            iterations: 32_000,
            batch_size: 1,
            num_classes: 2,
            width_divisor: 1,
            head_width: 4096,
            seed: 0,
            log_every: 10,
            checkpoint_every: 1000,
        }
    }
}

impl FcnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.dropout_probability) {
            return bad("dropout_probability must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !(self.skip_init_std >= 0.0) {
            return bad("weight_decay and skip_init_std must be >= 0");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.batch_size == 0 || self.width_divisor == 0 || self.head_width == 0 {
            return bad("batch_size, width_divisor and head_width must be >= 1");
        }
        if self.num_classes < 2 {
            return bad("num_classes must be >= 2");
        }
        Ok(())
    }

    pub fn stage_widths(&self) -> [usize; 5] {
        VGG_STAGES.map(|(_, w)| (w / self.width_divisor).max(1))
    }
}

/// Names of the encoder parameters, in VGG order (`conv1_1` .. `conv5_3`).
pub fn encoder_layer_names() -> Vec<String> {
    let mut names = Vec::new();
    for (s, &(n, _)) in VGG_STAGES.iter().enumerate() {
        for i in 0..n {
            names.push(format!("conv{}_{}", s + 1, i + 1));
        }
    }
    names
}

pub struct FcnModel<T: Real = f32> {
    config: FcnConfig,
    /// Stages 1-3, ending with pool 3.
    to_pool3: Sequential<T>,
    to_pool4: Sequential<T>,
    to_pool5: Sequential<T>,
    head: Sequential<T>,
    upscore2: ConvTranspose2d<T>,
    score_pool4: Conv2d<T>,
    upscore_pool4: ConvTranspose2d<T>,
    score_pool3: Conv2d<T>,
    upscore8: ConvTranspose2d<T>,
    /// Set by `forward_train`, consumed by `backward`.
    primed: bool,
}

/// Builds the network. Encoder convolutions use He initialization unless
/// `pretrained_encoder` supplies `convS_I.weight` / `.bias` tensors; skip
/// projections draw from N(0, skip_init_std²); upsamplers start bilinear.
pub fn build_fcn<T: Real>(config: &FcnConfig, pretrained_encoder: Option<&[NamedTensor]>) -> Result<FcnModel<T>> {
    config.validate()?;
    let mut rng = NnRng::seed_from_u64(config.seed);
    let widths = config.stage_widths();
    let relu = Init::He { slope: 0.0 };
    let mut stages: Vec<Sequential<T>> = Vec::new();
    let mut ch = 3;
    for (s, &(n, _)) in VGG_STAGES.iter().enumerate() {
        let mut seq = Sequential::new();
        for i in 0..n {
            let name = format!("conv{}_{}", s + 1, i + 1);
            seq.push(Conv2d::new(&name, ch, widths[s], 3, 1, 1, relu, &mut rng));
            seq.push(Activation::relu());
            ch = widths[s];
        }
        seq.push(MaxPool2d::new(2, 2));
        stages.push(seq);
    }
    let mut to_pool3 = Sequential::new();
    let mut it = stages.into_iter();
    for _ in 0..3 {
        to_pool3.push(it.next().expect("five stages"));
    }
    let to_pool4 = it.next().expect("five stages");
    let to_pool5 = it.next().expect("five stages");

    let k = config.num_classes;
    let hw = config.head_width;
    let p = config.dropout_probability;
    let head = Sequential::new()
        .with(Conv2d::new("fc6", widths[4], hw, 1, 1, 0, relu, &mut rng))
        .with(Activation::relu())
        .with(Dropout::new(p))
        .with(Conv2d::new("fc7", hw, hw, 1, 1, 0, relu, &mut rng))
        .with(Activation::relu())
        .with(Dropout::new(p))
        .with(Conv2d::new("score_fr", hw, k, 1, 1, 0, Init::He { slope: 1.0 }, &mut rng));
    let skip = Init::Normal(config.skip_init_std);
    let mut model = FcnModel {
        config: config.clone(),
        to_pool3,
        to_pool4,
        to_pool5,
        head,
        upscore2: ConvTranspose2d::new("upscore2", k, k, 4, 2, 1, Init::Bilinear, &mut rng),
        score_pool4: Conv2d::new("score_pool4", widths[3], k, 1, 1, 0, skip, &mut rng),
        upscore_pool4: ConvTranspose2d::new("upscore_pool4", k, k, 4, 2, 1, Init::Bilinear, &mut rng),
        score_pool3: Conv2d::new("score_pool3", widths[2], k, 1, 1, 0, skip, &mut rng),
        upscore8: ConvTranspose2d::new("upscore8", k, k, 16, 8, 4, Init::Bilinear, &mut rng),
        primed: false,
    };
    if let Some(tensors) = pretrained_encoder {
        let names = encoder_layer_names();
        nn::import_matching(&mut model, tensors, |n| {
            names.iter().any(|e| n.strip_prefix(e.as_str()).is_some_and(|r| r.starts_with('.')))
        })?;
    }
    Ok(model)
}

fn check_input_size(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || h % FCN_STRIDE != 0 || w % FCN_STRIDE != 0 {
        return Err(Error::Config(format!(
            "FCN input {w}x{h} must be a non-zero multiple of {FCN_STRIDE} on both sides"
        )));
    }
    Ok(())
}

impl<T: Real> FcnModel<T> {
    pub fn config(&self) -> &FcnConfig {
        &self.config
    }

    /// Class logits (`num_classes x H x W`) for a `3 x H x W` input.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_input_size(x.height(), x.width())?;
        if x.channels() != 3 {
            return Err(Error::Config(format!("FCN expects 3 input channels, got {}", x.channels())));
        }
        Ok(self.forward(x))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: FCN_KIND.into(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tensors: nn::export_params(self),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(FCN_KIND)?;
        let config: FcnConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Error::Checkpoint(format!("FCN config: {e}")))?;
        let mut model = build_fcn(&config, None)?;
        nn::import_params(&mut model, &ckpt.tensors)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

impl<T: Real> Module<T> for FcnModel<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let p3 = self.to_pool3.forward(x);
        let p4 = self.to_pool4.forward(&p3);
        let p5 = self.to_pool5.forward(&p4);
        let mut fuse4 = self.upscore2.forward(&self.head.forward(&p5));
        fuse4.add_assign(&self.score_pool4.forward(&p4));
        let mut fuse3 = self.upscore_pool4.forward(&fuse4);
        fuse3.add_assign(&self.score_pool3.forward(&p3));
        self.upscore8.forward(&fuse3)
    }

    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T> {
        let p3 = self.to_pool3.forward_train(x, rng);
        let p4 = self.to_pool4.forward_train(&p3, rng);
        let p5 = self.to_pool5.forward_train(&p4, rng);
        let h = self.head.forward_train(&p5, rng);
        let mut fuse4 = self.upscore2.forward_train(&h, rng);
        fuse4.add_assign(&self.score_pool4.forward_train(&p4, rng));
        let mut fuse3 = self.upscore_pool4.forward_train(&fuse4, rng);
        fuse3.add_assign(&self.score_pool3.forward_train(&p3, rng));
        self.primed = true;
        self.upscore8.forward_train(&fuse3, rng)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        assert!(std::mem::take(&mut self.primed), "FcnModel::backward without forward_train");
        let g_fuse3 = self.upscore8.backward(grad);
        let g_p3_skip = self.score_pool3.backward(&g_fuse3);
        let g_fuse4 = self.upscore_pool4.backward(&g_fuse3);
        let g_p4_skip = self.score_pool4.backward(&g_fuse4);
        let g_h = self.upscore2.backward(&g_fuse4);
        let g_p5 = self.head.backward(&g_h);
        let mut g_p4 = self.to_pool5.backward(&g_p5);
        g_p4.add_assign(&g_p4_skip);
        let mut g_p3 = self.to_pool4.backward(&g_p4);
        g_p3.add_assign(&g_p3_skip);
        self.to_pool3.backward(&g_p3)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.to_pool3.visit_params(f);
        self.to_pool4.visit_params(f);
        self.to_pool5.visit_params(f);
        self.head.visit_params(f);
        self.upscore2.visit_params(f);
        self.score_pool4.visit_params(f);
        self.upscore_pool4.visit_params(f);
        self.score_pool3.visit_params(f);
        self.upscore8.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.to_pool3.visit_params_mut(f);
        self.to_pool4.visit_params_mut(f);
        self.to_pool5.visit_params_mut(f);
        self.head.visit_params_mut(f);
        self.upscore2.visit_params_mut(f);
        self.score_pool4.visit_params_mut(f);
        self.upscore_pool4.visit_params_mut(f);
        self.score_pool3.visit_params_mut(f);
        self.upscore8.visit_params_mut(f);
    }
}

/// Mean per-pixel cross-entropy of 2-class logits against a mask, with its
/// gradient.
pub fn fcn_loss_grad<T: Real>(logits: &Tensor<T>, target: &BinaryMask) -> Result<(T, Tensor<T>)> {
    if (logits.width(), logits.height()) != target.dims() {
        return Err(Error::Validation(format!(
            "logits are {}x{} but mask is {}x{}",
            logits.width(),
            logits.height(),
            target.width(),
            target.height()
        )));
    }
    Ok(softmax_cross_entropy(logits, target.labels()))
}

pub fn fcn_loss<T: Real>(logits: &Tensor<T>, target: &BinaryMask) -> Result<f64> {
    fcn_loss_grad(logits, target).map(|(l, _)| l.as_f64())
}

/// Symmetric zero padding up to the next multiple of `FCN_STRIDE`.
/// Returns the padded tensor and the `(top, left)` offset of the original.
pub fn pad_to_stride<T: Real>(x: &Tensor<T>) -> (Tensor<T>, (usize, usize)) {
    let (h, w) = (x.height(), x.width());
    let ph = h.div_ceil(FCN_STRIDE).max(1) * FCN_STRIDE;
    let pw = w.div_ceil(FCN_STRIDE).max(1) * FCN_STRIDE;
    let (top, left) = ((ph - h) / 2, (pw - w) / 2);
    (x.pad(top, left, ph, pw), (top, left))
}

fn pad_mask(mask: &BinaryMask, top: usize, left: usize, h: usize, w: usize) -> BinaryMask {
    mask.paste_into(left, top, w, h)
}

/// Per-pixel argmax of the logits for an image of any size; inputs whose
/// sides are not multiples of 32 are padded and the pad is stripped again.
pub fn predict_fcn<T: Real>(model: &FcnModel<T>, image: &RgbImage) -> Result<BinaryMask> {
    let x: Tensor<T> = rgb_to_tensor(image).cast();
    let (h, w) = (x.height(), x.width());
    let (padded, (top, left)) = pad_to_stride(&x);
    let logits = model.logits(&padded)?;
    Ok(argmax_mask(&logits).crop(left, top, w, h))
}

/// Label 1 where class-1 logit strictly exceeds class 0 (ties go to 0).
pub fn argmax_mask<T: Real>(logits: &Tensor<T>) -> BinaryMask {
    let (c, h, w) = logits.shape();
    let n = h * w;
    let data = logits.data();
    let labels = (0..n)
        .map(|p| {
            let mut best = 0;
            for k in 1..c {
                if data[k * n + p] > data[best * n + p] {
                    best = k;
                }
            }
            (best == 1) as u8
        })
        .collect();
    BinaryMask::new(w, h, labels).expect("labels sized by construction")
}

/// Where and how often to persist training state.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    pub checkpoint: Option<PathBuf>,
    pub loss_trace: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FcnTrainReport {
    /// `(iteration, loss)` every `log_every` steps and at the last step.
    pub loss_trace: Vec<(usize, f64)>,
}

struct FcnExample {
    input: Tensor<f32>,
    mask: BinaryMask,
}

fn prepare(data: &[LabeledImage]) -> Vec<FcnExample> {
    data.iter()
        .map(|d| {
            let x = rgb_to_tensor(&d.image);
            let (h, w) = (x.height(), x.width());
            let (input, (top, left)) = pad_to_stride(&x);
            let mask = pad_mask(&d.mask, top, left, input.height(), input.width());
            debug_assert_eq!(d.mask.dims(), (w, h));
            FcnExample { input, mask }
        })
        .collect()
}

/// Runs exactly `config.iterations` Adam steps (each over `batch_size`
/// images drawn from a reshuffled epoch order).
pub fn train_fcn(model: &mut FcnModel<f32>, data: &[LabeledImage], outputs: &TrainOutputs) -> Result<FcnTrainReport> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("FCN training set is empty".into()));
    }
    for d in data {
        if d.mask.dims() != (d.image.width() as usize, d.image.height() as usize) {
            return Err(Error::Validation(format!("sample `{}`: mask and image sizes differ", d.id)));
        }
    }
    let examples = prepare(data);
    let mut rng = NnRng::seed_from_u64(cfg.seed ^ 0x5eed_f0c5);
    let mut adam = Adam::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut trace = Vec::new();
    let scale = 1.0 / cfg.batch_size as f32;
    for it in 1..=cfg.iterations {
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order = (0..examples.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = &examples[order[cursor]];
            cursor += 1;
            let logits = model.forward_train(&ex.input, &mut rng);
            let (l, grad) = fcn_loss_grad(&logits, &ex.mask)?;
            loss += l as f64 / cfg.batch_size as f64;
            model.backward(&grad.map(|g| g * scale));
        }
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                message: format!("FCN loss {loss}"),
            });
        }
        adam.step(model);
        if it % cfg.log_every.max(1) == 0 || it == cfg.iterations {
            trace.push((it, loss));
            log::debug!("fcn iteration {it}: loss {loss:.5}");
        }
        if let Some(path) = &outputs.checkpoint {
            if it % cfg.checkpoint_every.max(1) == 0 || it == cfg.iterations {
                model.save(path)?;
            }
        }
    }
    if let Some(path) = &outputs.loss_trace {
        let rows: Vec<_> = trace.iter().map(|&(i, l)| (i, vec![l])).collect();
        write_trace(path, &["loss"], &rows)?;
    }
    Ok(FcnTrainReport { loss_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FcnConfig {
        FcnConfig {
            width_divisor: 32,
            head_width: 8,
            ..FcnConfig::default()
        }
    }

    #[test]
    fn logits_match_input_size() {
        let m: FcnModel<f32> = build_fcn(&tiny(), None).unwrap();
        for (h, w) in [(128, 128), (256, 192), (32, 64)] {
            let y = m.logits(&Tensor::zeros(3, h, w)).unwrap();
            assert_eq!(y.shape(), (2, h, w));
        }
        assert!(matches!(m.logits(&Tensor::zeros(3, 100, 100)), Err(Error::Config(_))));
    }

    #[test]
    fn cross_entropy_worked_example() {
        let logits = Tensor::<f64>::from_vec(2, 1, 2, vec![2.0, 0.0, 0.0, 2.0]);
        let mask = BinaryMask::from_rows(&[&[0, 1]]).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((fcn_loss(&logits, &mask).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1269).abs() < 1e-4);
        let uniform = Tensor::<f64>::zeros(2, 3, 3);
        assert!((fcn_loss(&uniform, &BinaryMask::zeros(3, 3)).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(fcn_loss(&uniform, &BinaryMask::zeros(2, 3)).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            FcnConfig { iterations: 0, ..tiny() },
            FcnConfig { learning_rate: 0.0, ..tiny() },
            FcnConfig { dropout_probability: 1.0, ..tiny() },
        ] {
            assert!(matches!(build_fcn::<f32>(&cfg, None), Err(Error::Config(_))));
        }
    }

    #[test]
    fn pretrained_shape_mismatch_names_layer() {
        let bad = vec![NamedTensor {
            name: "conv1_1.weight".into(),
            shape: vec![1, 1, 3, 3],
            data: vec![0.0; 9],
        }];
        let err = build_fcn::<f32>(&tiny(), Some(&bad)).err().unwrap().to_string();
        assert!(err.contains("conv1_1.weight"), "{err}");
    }

    #[test]
    fn pretrained_encoder_is_loaded() {
        let donor: FcnModel<f32> = build_fcn(&FcnConfig { seed: 9, ..tiny() }, None).unwrap();
        let tensors = nn::export_params(&donor);
        let m: FcnModel<f32> = build_fcn(&tiny(), Some(&tensors)).unwrap();
        let theirs = tensors.iter().find(|t| t.name == "conv3_2.weight").unwrap();
        let mine = nn::export_params(&m).into_iter().find(|t| t.name == "conv3_2.weight").unwrap();
        assert_eq!(theirs.data, mine.data);
        let head = nn::export_params(&m).into_iter().find(|t| t.name == "fc6.weight").unwrap();
        assert_ne!(tensors.iter().find(|t| t.name == "fc6.weight").unwrap().data, head.data);
    }

    #[test]
    fn prediction_pads_odd_sizes() {
        let m: FcnModel<f32> = build_fcn(&tiny(), None).unwrap();
        let img = RgbImage::from_fn(50, 37, |x, y| image::Rgb([(x * 5) as u8, (y * 6) as u8, 9]));
        let a = predict_fcn(&m, &img).unwrap();
        assert_eq!(a.dims(), (50, 37));
        assert_eq!(a, predict_fcn(&m, &img).unwrap());
    }
}
