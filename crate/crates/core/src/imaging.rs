//! Resampling and pixel-format helpers shared by the stages.

use image::RgbImage;

use crate::mask::BinaryMask;
use crate::nn::{Real, Tensor};

/// Bilinear resize with half-pixel centers; border samples clamp.
pub fn resize_bilinear<T: Real>(src: &Tensor<T>, out_h: usize, out_w: usize) -> Tensor<T> {
    let (c, h, w) = src.shape();
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(out_h, h);
    let xs = taps(out_w, w);
    Tensor::from_fn(c, out_h, out_w, |ch, y, x| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let v = |yy: usize, xx: usize| src.at(ch, yy, xx).as_f64();
        let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
        let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
        T::of(top * (1.0 - fy) + bottom * fy)
    })
}

fn nearest_index(o: usize, out: usize, inp: usize) -> usize {
    (((o as f64 + 0.5) * inp as f64 / out as f64).floor() as usize).min(inp - 1)
}

/// Nearest-neighbour resize of a label mask.
pub fn resize_mask_nearest(mask: &BinaryMask, out_w: usize, out_h: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(out_w, out_h, |x, y| {
        mask.get(nearest_index(x, out_w, w), nearest_index(y, out_h, h)) == 1
    })
}

/// Nearest-neighbour resize of a tensor.
pub fn resize_nearest<T: Real>(src: &Tensor<T>, out_h: usize, out_w: usize) -> Tensor<T> {
    let (c, h, w) = src.shape();
    Tensor::from_fn(c, out_h, out_w, |ch, y, x| {
        src.at(ch, nearest_index(y, out_h, h), nearest_index(x, out_w, w))
    })
}

/// Single-channel 0/1 tensor of a mask.
pub fn mask_to_tensor<T: Real>(mask: &BinaryMask) -> Tensor<T> {
    Tensor::from_vec(
        1,
        mask.height(),
        mask.width(),
        mask.labels().iter().map(|&l| T::of(l as f64)).collect(),
    )
}

/// Thresholds channel 0 of `scores` at `threshold` (strictly greater is iris).
pub fn tensor_to_mask<T: Real>(scores: &Tensor<T>, threshold: f64) -> BinaryMask {
    let t = T::of(threshold);
    BinaryMask::from_fn(scores.width(), scores.height(), |x, y| scores.at(0, y, x) > t)
}

/// Mean of the RGB channels.
pub fn luminance(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    Tensor::from_fn(1, h, w, |_, y, x| {
        let p = img.get_pixel(x as u32, y as u32).0;
        (p[0] as f32 + p[1] as f32 + p[2] as f32) / 3.0
    })
}
