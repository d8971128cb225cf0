//! Conditional adversarial segmenter: a U-shaped generator maps an eye
//! image to per-pixel iris scores in [0, 1]; a patch discriminator judges
//! (image, mask) pairs. Trained from scratch with alternating updates.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{rgb_to_tensor, LabeledImage};
use crate::error::{Error, Result};
use crate::imaging::{mask_to_tensor, resize_bilinear, resize_mask_nearest, tensor_to_mask};
use crate::mask::BinaryMask;
use crate::nn::{
    self, bce_with_logits, l1_loss, Activation, Adam, AdamConfig, Checkpoint, Conv2d, ConvTranspose2d, Dropout, Init,
    InstanceNorm, Module, NnRng, Param, Real, Sequential, Tensor,
};
use crate::trace::write_trace;

pub const GAN_KIND: &str = "gan";
pub const GAN_THRESHOLD: f64 = 0.5;
pub const LOSS_COLUMNS: [&str; 4] = ["generator_adversarial", "reconstruction", "discriminator_real", "discriminator_fake"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub input_side: usize,
    pub adversarial_weight: f64,
    pub reconstruction_weight: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub iterations: usize,
    /// Channels after the first generator/discriminator convolution.
    pub base_width: usize,
    /// Number of stride-2 stages in the generator; `log2(input_side)`
    /// reaches a 1x1 bottleneck.
    pub generator_depth: usize,
    pub dropout_probability: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub log_every: usize,
    pub checkpoint_every: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            input_side: 256,
            adversarial_weight: 1.0,
            reconstruction_weight: 100.0,
            learning_rate: 2e-4,
            beta1: 0.5,
            iterations: 32_000,
            base_width: 64,
            generator_depth: 8,
            dropout_probability: 0.5,
            batch_size: 1,
            seed: 0,
            log_every: 10,
            checkpoint_every: 1000,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_side < 64 || !self.input_side.is_power_of_two() {
            return bad(format!("input_side {} must be a power of two >= 64", self.input_side));
        }
        if !(self.adversarial_weight >= 0.0 && self.reconstruction_weight >= 0.0) {
            return bad("loss weights must be >= 0".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if self.base_width == 0 || self.batch_size == 0 {
            return bad("base_width and batch_size must be >= 1".into());
        }
        if self.generator_depth < 2 || (1usize << self.generator_depth) > self.input_side {
            return bad(format!(
                "generator_depth {} must be in [2, log2(input_side)]",
                self.generator_depth
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_probability) {
            return bad("dropout_probability must be in [0, 1)".into());
        }
        Ok(())
    }

    fn level_width(&self, level: usize) -> usize {
        self.base_width << level.min(3)
    }
}

/// One level of the U-Net: `down -> inner -> up`, with the level input
/// concatenated onto the output (except at the outermost level).
struct UnetLevel<T: Real> {
    down: Sequential<T>,
    inner: Option<Box<UnetLevel<T>>>,
    up: Sequential<T>,
    outermost: bool,
    skip_channels: usize,
}

impl<T: Real> UnetLevel<T> {
    fn build(cfg: &GanConfig, level: usize, in_channels: usize, rng: &mut NnRng) -> Self {
        let depth = cfg.generator_depth;
        let innermost = level + 1 == depth;
        let outermost = level == 0;
        let width = cfg.level_width(level);
        let name = format!("g{level}");
        let mut down = Sequential::new();
        if !outermost {
            down.push(Activation::leaky(0.2));
        }
        down.push(Conv2d::new(&format!("{name}.down"), in_channels, width, 4, 2, 1, Init::Normal(0.02), rng));
        if !outermost && !innermost {
            down.push(InstanceNorm::new(&format!("{name}.down_norm"), width));
        }
        let inner = (!innermost).then(|| Box::new(Self::build(cfg, level + 1, width, rng)));
        let up_in = if innermost { width } else { 2 * width };
        let out_channels = if outermost { 1 } else { in_channels };
        let mut up = Sequential::new()
            .with(Activation::relu())
            .with(ConvTranspose2d::new(&format!("{name}.up"), up_in, out_channels, 4, 2, 1, Init::Normal(0.02), rng));
        if outermost {
            up.push(Activation::sigmoid());
        } else {
            up.push(InstanceNorm::new(&format!("{name}.up_norm"), out_channels));
            // Dropout on the three levels just outside the bottleneck.
            if level + 4 >= depth && !innermost && cfg.dropout_probability > 0.0 {
                up.push(Dropout::new(cfg.dropout_probability));
            }
        }
        Self {
            down,
            inner,
            up,
            outermost,
            skip_channels: in_channels,
        }
    }
}

impl<T: Real> Module<T> for UnetLevel<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut h = self.down.forward(x);
        if let Some(inner) = &self.inner {
            h = inner.forward(&h);
        }
        let y = self.up.forward(&h);
        if self.outermost {
            y
        } else {
            Tensor::concat_channels(x, &y)
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T> {
        let mut h = self.down.forward_train(x, rng);
        if let Some(inner) = &mut self.inner {
            h = inner.forward_train(&h, rng);
        }
        let y = self.up.forward_train(&h, rng);
        if self.outermost {
            y
        } else {
            Tensor::concat_channels(x, &y)
        }
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let (g_skip, g_y) = if self.outermost {
            (None, grad.clone())
        } else {
            let (a, b) = grad.split_channels(self.skip_channels);
            (Some(a), b)
        };
        let mut g = self.up.backward(&g_y);
        if let Some(inner) = &mut self.inner {
            g = inner.backward(&g);
        }
        let mut gx = self.down.backward(&g);
        if let Some(s) = g_skip {
            gx.add_assign(&s);
        }
        gx
    }

    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.down.visit_params(f);
        if let Some(inner) = &self.inner {
            inner.visit_params(f);
        }
        self.up.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.down.visit_params_mut(f);
        if let Some(inner) = &mut self.inner {
            inner.visit_params_mut(f);
        }
        self.up.visit_params_mut(f);
    }
}

/// U-shaped generator: `3 x S x S` image to `1 x S x S` scores in [0, 1].
pub struct Generator<T: Real = f32> {
    net: UnetLevel<T>,
}

impl<T: Real> Module<T> for Generator<T> {
    fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        self.net.forward(x)
    }
    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut NnRng) -> Tensor<T> {
        self.net.forward_train(x, rng)
    }
    fn backward(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        self.net.backward(grad)
    }
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.net.visit_params(f)
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.net.visit_params_mut(f)
    }
}

/// Patch discriminator over the 4-channel (image, mask) concatenation:
/// three stride-2 4x4 convolutions, then two stride-1 3x3 convolutions,
/// giving one logit per `8 x 8` patch.
pub fn build_discriminator<T: Real>(cfg: &GanConfig, rng: &mut NnRng) -> Sequential<T> {
    let w = cfg.base_width;
    let init = Init::Normal(0.02);
    Sequential::new()
        .with(Conv2d::new("d0", 4, w, 4, 2, 1, init, rng))
        .with(Activation::leaky(0.2))
        .with(Conv2d::new("d1", w, 2 * w, 4, 2, 1, init, rng))
        .with(InstanceNorm::new("d1_norm", 2 * w))
        .with(Activation::leaky(0.2))
        .with(Conv2d::new("d2", 2 * w, 4 * w, 4, 2, 1, init, rng))
        .with(InstanceNorm::new("d2_norm", 4 * w))
        .with(Activation::leaky(0.2))
        .with(Conv2d::new("d3", 4 * w, 8 * w, 3, 1, 1, init, rng))
        .with(InstanceNorm::new("d3_norm", 8 * w))
        .with(Activation::leaky(0.2))
        .with(Conv2d::new("d4", 8 * w, 1, 3, 1, 1, init, rng))
}

/// Losses of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanLosses {
    pub generator_adversarial: f64,
    pub reconstruction: f64,
    pub discriminator_real: f64,
    pub discriminator_fake: f64,
    /// Share of patch decisions the discriminator got right in this step.
    pub discriminator_accuracy: f64,
}

impl GanLosses {
    pub fn columns(&self) -> [f64; 4] {
        [
            self.generator_adversarial,
            self.reconstruction,
            self.discriminator_real,
            self.discriminator_fake,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.columns().iter().all(|v| v.is_finite())
    }
}

pub struct GanState {
    pub config: GanConfig,
    pub generator: Generator<f32>,
    pub discriminator: Sequential<f32>,
    pub iteration: usize,
    /// Losses of every step so far.
    pub history: Vec<GanLosses>,
    opt_g: Adam<f32>,
    opt_d: Adam<f32>,
    rng: NnRng,
}

pub fn build_gan(config: &GanConfig) -> Result<GanState> {
    config.validate()?;
    let mut rng = NnRng::seed_from_u64(config.seed);
    let generator = Generator {
        net: UnetLevel::build(config, 0, 3, &mut rng),
    };
    let discriminator = build_discriminator(config, &mut rng);
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        beta1: config.beta1,
        ..AdamConfig::default()
    };
    Ok(GanState {
        config: config.clone(),
        generator,
        discriminator,
        iteration: 0,
        history: Vec::new(),
        opt_g: Adam::new(adam),
        opt_d: Adam::new(adam),
        rng: NnRng::seed_from_u64(config.seed ^ 0x6a4e_0001),
    })
}

/// A training pair already at the generator's resolution.
#[derive(Debug, Clone)]
pub struct GanPair {
    pub image: Tensor<f32>,
    pub mask: Tensor<f32>,
}

impl GanPair {
    pub fn new(image: &RgbImage, mask: &BinaryMask, side: usize) -> Result<Self> {
        let (image, _) = resize_for_gan(image, side)?;
        let (mask, _) = resize_mask_for_gan(mask, side)?;
        Ok(Self {
            image,
            mask: mask_to_tensor(&mask),
        })
    }
}

fn patch_accuracy(logits: &Tensor<f32>, real: bool) -> (usize, usize) {
    let right = logits.data().iter().filter(|&&z| (z > 0.0) == real).count();
    (right, logits.len())
}

/// One discriminator update followed by one generator update.
pub fn gan_step(state: &mut GanState, batch: &[GanPair]) -> Result<GanLosses> {
    if batch.is_empty() {
        return Err(Error::Validation("empty GAN batch".into()));
    }
    let side = state.config.input_side;
    for p in batch {
        if p.image.shape() != (3, side, side) || p.mask.shape() != (1, side, side) {
            return Err(Error::Validation(format!("GAN pairs must be resized to {side}x{side}")));
        }
    }
    let cfg = state.config.clone();
    let scale = 1.0 / batch.len() as f32;
    let mut losses = GanLosses {
        generator_adversarial: 0.0,
        reconstruction: 0.0,
        discriminator_real: 0.0,
        discriminator_fake: 0.0,
        discriminator_accuracy: 0.0,
    };
    let (mut right, mut total) = (0, 0);

    // The dropout draws of each generator pass are replayed for the
    // generator update so both updates see the same fake.
    let rng_states: Vec<NnRng> = batch
        .iter()
        .map(|_| {
            let r = state.rng.clone();
            state.rng = NnRng::seed_from_u64(rand::Rng::random(&mut state.rng));
            r
        })
        .collect();

    // Discriminator: real pairs labelled 1, generated pairs 0; objective halved.
    for (pair, r) in batch.iter().zip(&rng_states) {
        let fake = state.generator.forward_train(&pair.image, &mut r.clone());
        let logits = state
            .discriminator
            .forward_train(&Tensor::concat_channels(&pair.image, &pair.mask), &mut state.rng);
        let (l, g) = bce_with_logits(&logits, 1.0);
        state.discriminator.backward(&g.map(|v| v * 0.5 * scale));
        losses.discriminator_real += l as f64 / batch.len() as f64;
        let (a, n) = patch_accuracy(&logits, true);
        right += a;
        total += n;

        let logits = state
            .discriminator
            .forward_train(&Tensor::concat_channels(&pair.image, &fake), &mut state.rng);
        let (l, g) = bce_with_logits(&logits, 0.0);
        state.discriminator.backward(&g.map(|v| v * 0.5 * scale));
        losses.discriminator_fake += l as f64 / batch.len() as f64;
        let (a, n) = patch_accuracy(&logits, false);
        right += a;
        total += n;
    }
    if !(losses.discriminator_real.is_finite() && losses.discriminator_fake.is_finite()) {
        nn::zero_grad(&mut state.discriminator);
        nn::zero_grad(&mut state.generator);
        return Err(divergence(state, &losses));
    }
    // Generator caches from the discriminator pass are discarded.
    nn::zero_grad(&mut state.generator);
    state.opt_d.step(&mut state.discriminator);

    // Generator: fool the updated discriminator and match the mask.
    for (pair, r) in batch.iter().zip(&rng_states) {
        let fake = state.generator.forward_train(&pair.image, &mut r.clone());
        let logits = state
            .discriminator
            .forward_train(&Tensor::concat_channels(&pair.image, &fake), &mut state.rng);
        let (adv, g) = bce_with_logits(&logits, 1.0);
        let g_in = state
            .discriminator
            .backward(&g.map(|v| v * cfg.adversarial_weight as f32 * scale));
        let (_, mut g_fake) = g_in.split_channels(3);
        let (rec, g_rec) = l1_loss(&fake, &pair.mask);
        g_fake.add_assign(&g_rec.map(|v| v * cfg.reconstruction_weight as f32 * scale));
        state.generator.backward(&g_fake);
        losses.generator_adversarial += adv as f64 / batch.len() as f64;
        losses.reconstruction += rec as f64 / batch.len() as f64;
    }
    nn::zero_grad(&mut state.discriminator);
    if !losses.all_finite() {
        nn::zero_grad(&mut state.generator);
        return Err(divergence(state, &losses));
    }
    state.opt_g.step(&mut state.generator);
    losses.discriminator_accuracy = right as f64 / total as f64;
    state.iteration += 1;
    state.history.push(losses);
    Ok(losses)
}

fn divergence(state: &GanState, losses: &GanLosses) -> Error {
    Error::Divergence {
        iteration: state.iteration,
        message: format!("non-finite GAN loss: {losses:?}"),
    }
}

/// Original size of a resized input, for mapping predictions back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizeRecord {
    pub width: usize,
    pub height: usize,
}

impl ResizeRecord {
    /// Nearest-neighbour resize back to the recorded size.
    pub fn restore_mask(&self, mask: &BinaryMask) -> BinaryMask {
        resize_mask_nearest(mask, self.width, self.height)
    }
}

/// Bilinear resize of an image to `side x side` network input.
pub fn resize_for_gan(image: &RgbImage, side: usize) -> Result<(Tensor<f32>, ResizeRecord)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 || side == 0 {
        return Err(Error::Validation("cannot resize an empty image".into()));
    }
    let t = rgb_to_tensor(image);
    let out = if (w, h) == (side, side) {
        t
    } else {
        resize_bilinear(&t, side, side)
    };
    Ok((out, ResizeRecord { width: w, height: h }))
}

/// Nearest-neighbour resize of a mask to `side x side`.
pub fn resize_mask_for_gan(mask: &BinaryMask, side: usize) -> Result<(BinaryMask, ResizeRecord)> {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 || side == 0 {
        return Err(Error::Validation("cannot resize an empty mask".into()));
    }
    Ok((resize_mask_nearest(mask, side, side), ResizeRecord { width: w, height: h }))
}

impl GanState {
    /// Generator scores in [0, 1] at `input_side` resolution.
    pub fn scores(&self, image: &RgbImage) -> Result<(Tensor<f32>, ResizeRecord)> {
        let (x, record) = resize_for_gan(image, self.config.input_side)?;
        Ok((self.generator.forward(&x), record))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = nn::export_params(&self.generator);
        tensors.extend(nn::export_params(&self.discriminator));
        Checkpoint {
            kind: GAN_KIND.into(),
            config: serde_json::json!({ "config": self.config, "iteration": self.iteration }),
            tensors,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(GAN_KIND)?;
        let bad = |e: String| Error::Checkpoint(format!("GAN config: {e}"));
        let config: GanConfig =
            serde_json::from_value(ckpt.config["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let iteration = ckpt.config["iteration"]
            .as_u64()
            .ok_or_else(|| bad("missing iteration".into()))? as usize;
        let mut state = build_gan(&config)?;
        nn::import_params(&mut state.generator, &ckpt.tensors)?;
        nn::import_params(&mut state.discriminator, &ckpt.tensors)?;
        state.iteration = iteration;
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Thresholds generator scores at 0.5 and maps the mask back to the
/// image's original size. Dropout is off, so this is deterministic.
pub fn predict_gan(state: &GanState, image: &RgbImage) -> Result<BinaryMask> {
    let (scores, record) = state.scores(image)?;
    Ok(record.restore_mask(&tensor_to_mask(&scores, GAN_THRESHOLD)))
}

#[derive(Debug, Clone, Default)]
pub struct GanOutputs {
    pub checkpoint: Option<PathBuf>,
    pub loss_trace: Option<PathBuf>,
}

/// Runs `config.iterations - state.iteration` steps over reshuffled epochs.
pub fn train_gan(state: &mut GanState, data: &[LabeledImage], outputs: &GanOutputs) -> Result<Vec<(usize, GanLosses)>> {
    if data.is_empty() {
        return Err(Error::Validation("GAN training set is empty".into()));
    }
    let side = state.config.input_side;
    let pairs = data
        .iter()
        .map(|d| GanPair::new(&d.image, &d.mask, side))
        .collect::<Result<Vec<_>>>()?;
    let mut order_rng = NnRng::seed_from_u64(state.config.seed ^ 0x0bad_5eed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut trace = Vec::new();
    let cfg = state.config.clone();
    while state.iteration < cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order = (0..pairs.len()).collect();
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(pairs[order[cursor]].clone());
            cursor += 1;
        }
        let losses = gan_step(state, &batch)?;
        let it = state.iteration;
        if it % cfg.log_every.max(1) == 0 || it == cfg.iterations {
            trace.push((it, losses));
            log::debug!("gan iteration {it}: {losses:?}");
        }
        if let Some(path) = &outputs.checkpoint {
            if it % cfg.checkpoint_every.max(1) == 0 || it == cfg.iterations {
                state.save(path)?;
            }
        }
    }
    if let Some(path) = &outputs.loss_trace {
        let rows: Vec<_> = trace.iter().map(|(i, l)| (*i, l.columns().to_vec())).collect();
        write_trace(path, &LOSS_COLUMNS, &rows)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GanConfig {
        GanConfig {
            input_side: 64,
            base_width: 4,
            generator_depth: 6,
            ..GanConfig::default()
        }
    }

    #[test]
    fn shapes_and_range() {
        let state = build_gan(&small()).unwrap();
        let x = Tensor::from_fn(3, 64, 64, |c, y, x| ((c + y * 3 + x * 7) % 11) as f32 / 11.0 - 0.5);
        let y = state.generator.forward(&x);
        assert_eq!(y.shape(), (1, 64, 64));
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let d = state.discriminator.forward(&Tensor::concat_channels(&x, &y));
        assert_eq!(d.shape(), (1, 8, 8));
    }

    #[test]
    fn discriminator_grid_is_side_over_eight() {
        let mut rng = NnRng::seed_from_u64(0);
        let d = build_discriminator::<f32>(&GanConfig { base_width: 2, ..GanConfig::default() }, &mut rng);
        assert_eq!(d.forward(&Tensor::zeros(4, 256, 256)).shape(), (1, 32, 32));
    }

    #[test]
    fn bad_sides_are_rejected() {
        for side in [100, 32, 0] {
            let cfg = GanConfig { input_side: side, ..small() };
            assert!(matches!(build_gan(&cfg), Err(Error::Config(_))));
        }
        assert!(matches!(build_gan(&GanConfig { iterations: 0, ..small() }), Err(Error::Config(_))));
    }

    #[test]
    fn one_step_advances_counter_and_moves_discriminator() {
        let mut state = build_gan(&small()).unwrap();
        let pair = GanPair {
            image: Tensor::from_fn(3, 64, 64, |c, y, x| ((c * 5 + y + x) % 9) as f32 / 9.0 - 0.5),
            mask: Tensor::from_fn(1, 64, 64, |_, y, x| ((x as i32 - 32).pow(2) + (y as i32 - 32).pow(2) < 300) as u8 as f32),
        };
        let before = nn::export_params(&state.discriminator);
        let losses = gan_step(&mut state, &[pair]).unwrap();
        assert_eq!(state.iteration, 1);
        assert!(losses.all_finite());
        let after = nn::export_params(&state.discriminator);
        let delta: f64 = before
            .iter()
            .zip(&after)
            .flat_map(|(a, b)| a.data.iter().zip(&b.data).map(|(x, y)| ((x - y) as f64).powi(2)))
            .sum();
        assert!(delta > 0.0);
    }

    #[test]
    fn resize_identity_and_constants() {
        let img = RgbImage::from_fn(64, 64, |x, y| image::Rgb([x as u8, y as u8, 7]));
        let (t, rec) = resize_for_gan(&img, 64).unwrap();
        assert_eq!(t, rgb_to_tensor(&img));
        assert_eq!(rec, ResizeRecord { width: 64, height: 64 });
        let ones = BinaryMask::filled(50, 30, 1);
        let (small, rec) = resize_mask_for_gan(&ones, 64).unwrap();
        assert_eq!(small.count_ones(), 64 * 64);
        assert_eq!(rec.restore_mask(&small), ones);
        assert!(resize_mask_for_gan(&BinaryMask::zeros(0, 0), 64).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let state = build_gan(&small()).unwrap();
        let path = dir.path().join("gan.ckpt");
        state.save(&path).unwrap();
        let back = GanState::load(&path).unwrap();
        let img = RgbImage::from_fn(40, 40, |x, y| image::Rgb([(x * 6) as u8, (y * 6) as u8, 90]));
        assert_eq!(predict_gan(&state, &img).unwrap(), predict_gan(&back, &img).unwrap());
    }
}
