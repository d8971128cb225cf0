use image::{Rgb, RgbImage};
use irisseg_core::corpus::{load_labeled, load_manifest, rgb_to_tensor};
use irisseg_core::fcn::{argmax_mask, build_fcn, predict_fcn, FcnConfig};
use irisseg_core::gan::{build_gan, gan_step, predict_gan, resize_mask_for_gan, GanConfig, GanPair, GAN_THRESHOLD};
use irisseg_core::imaging::tensor_to_mask;
use irisseg_core::nn::{Module, Tensor};
use irisseg_core::pipeline::generate_synthetic_dataset;
use irisseg_core::BinaryMask;
use proptest::prelude::*;

fn tiny_fcn() -> FcnConfig {
    FcnConfig {
        width_divisor: 32,
        head_width: 16,
        ..FcnConfig::default()
    }
}

fn tiny_gan() -> GanConfig {
    GanConfig {
        input_side: 64,
        base_width: 8,
        generator_depth: 6,
        ..GanConfig::default()
    }
}

fn noise_image(w: u32, h: u32, seed: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = (x.wrapping_mul(2654435761) ^ y.wrapping_mul(40503) ^ seed.wrapping_mul(97)) as u8;
        Rgb([v, v.wrapping_mul(3), v ^ 0x5a])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fcn_logits_match_the_input_size(kh in 1usize..5, kw in 1usize..5) {
        let model = build_fcn::<f32>(&tiny_fcn(), None).unwrap();
        let x = rgb_to_tensor(&noise_image(32 * kw as u32, 32 * kh as u32, 1));
        prop_assert_eq!(model.logits(&x).unwrap().shape(), (2, 32 * kh, 32 * kw));
    }

    #[test]
    fn fcn_prediction_keeps_arbitrary_sizes(w in 1u32..100, h in 1u32..100) {
        let model = build_fcn::<f32>(&tiny_fcn(), None).unwrap();
        prop_assert_eq!(predict_fcn(&model, &noise_image(w, h, 2)).unwrap().dims(), (w as usize, h as usize));
    }

    #[test]
    fn argmax_ignores_a_constant_logit_shift(
        vals in prop::collection::vec(-5.0f32..5.0, 2 * 6 * 7),
        shift in -100.0f32..100.0,
    ) {
        let logits = Tensor::from_vec(2, 6, 7, vals.clone());
        let shifted = Tensor::from_vec(2, 6, 7, vals.iter().map(|v| v + shift).collect());
        prop_assert_eq!(argmax_mask(&logits), argmax_mask(&shifted));
    }

    #[test]
    fn generator_scores_are_probabilities(seed in 0u32..1000) {
        let state = build_gan(&tiny_gan()).unwrap();
        let (scores, _) = state.scores(&noise_image(80, 50, seed)).unwrap();
        prop_assert_eq!(scores.shape(), (1, 64, 64));
        prop_assert!(scores.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let mask = tensor_to_mask(&scores, GAN_THRESHOLD);
        for (i, v) in scores.data().iter().enumerate() {
            prop_assert_eq!(mask.labels()[i] == 1, f64::from(*v) > GAN_THRESHOLD);
        }
    }
}

#[test]
fn thresholding_is_invariant_to_monotone_rescaling_around_the_cut() {
    let scores = Tensor::from_fn(1, 9, 9, |_, y, x| ((x * 9 + y) as f32) / 81.0);
    let squashed = Tensor::from_fn(1, 9, 9, |c, y, x| {
        let s = scores.at(c, y, x) - 0.5;
        0.5 + s * s.abs().sqrt()
    });
    assert_eq!(tensor_to_mask(&scores, 0.5), tensor_to_mask(&squashed, 0.5));
}

#[test]
fn predictions_are_deterministic() {
    let img = noise_image(70, 90, 3);
    let fcn = build_fcn::<f32>(&tiny_fcn(), None).unwrap();
    assert_eq!(predict_fcn(&fcn, &img).unwrap(), predict_fcn(&fcn, &img).unwrap());
    let gan = build_gan(&tiny_gan()).unwrap();
    let m = predict_gan(&gan, &img).unwrap();
    assert_eq!(m.dims(), (70, 90));
    assert_eq!(m, predict_gan(&gan, &img).unwrap());
}

#[test]
fn disc_survives_a_resize_round_trip() {
    let disc = BinaryMask::from_fn(512, 512, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - 256.0, y as f64 + 0.5 - 256.0);
        dx * dx + dy * dy < 256.0 * 256.0
    });
    let (small, record) = resize_mask_for_gan(&disc, 256).unwrap();
    let back = record.restore_mask(&small);
    assert_eq!(back.dims(), (512, 512));
    let iou = back.iou(&disc);
    assert!(iou >= 0.98, "IoU {iou}");
}

fn linear_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = ys.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum();
    let var: f64 = (0..ys.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    cov / var
}

fn synthetic_pairs(n: usize, side: usize) -> Vec<GanPair> {
    let dir = tempfile::tempdir().unwrap();
    let data = load_labeled(&load_manifest(&generate_synthetic_dataset(n, 128, 9, dir.path()).unwrap()).unwrap()).unwrap();
    data.iter().map(|d| GanPair::new(&d.image, &d.mask, side).unwrap()).collect()
}

#[test]
fn reconstruction_only_training_trends_down() {
    let pair = synthetic_pairs(1, 64);
    let mut state = build_gan(&GanConfig {
        adversarial_weight: 0.0,
        ..tiny_gan()
    })
    .unwrap();
    let losses: Vec<f64> = (0..200).map(|_| gan_step(&mut state, &pair).unwrap().reconstruction).collect();
    let slope = linear_slope(&losses);
    assert!(slope < 0.0, "slope {slope}");
}

#[test]
fn neither_network_saturates() {
    let pairs = synthetic_pairs(8, 64);
    let mut state = build_gan(&GanConfig {
        base_width: 16,
        ..tiny_gan()
    })
    .unwrap();
    let mut accuracy = Vec::new();
    for i in 0..1000 {
        let l = gan_step(&mut state, std::slice::from_ref(&pairs[i % pairs.len()])).unwrap();
        assert!(l.all_finite(), "step {i}: {l:?}");
        accuracy.push(l.discriminator_accuracy);
    }
    let window = &accuracy[500..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    assert!((0.02..=0.98).contains(&mean), "mean discriminator accuracy {mean:.3} over steps 500..1000");
}

#[test]
fn discriminator_patch_grid_matches_side() {
    let state = build_gan(&tiny_gan()).unwrap();
    let x = Tensor::<f32>::zeros(4, 64, 64);
    assert_eq!(state.discriminator.forward(&x).shape(), (1, 8, 8));
}
