use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Colour painted over false positives (predicted iris, truth background).
pub const FALSE_POSITIVE_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
/// Colour painted over false negatives (missed iris).
pub const FALSE_NEGATIVE_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

/// Copy of `image` with false positives green and false negatives red;
/// correctly labelled pixels are left untouched.
pub fn render_overlay(image: &RgbImage, pred: &BinaryMask, truth: &BinaryMask) -> Result<RgbImage> {
    let dims = (image.width() as usize, image.height() as usize);
    if pred.dims() != dims || truth.dims() != dims {
        return Err(Error::Validation(format!(
            "overlay needs equal sizes: image {}x{}, prediction {}x{}, truth {}x{}",
            dims.0,
            dims.1,
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut out = image.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let (p, t) = (pred.get(x as usize, y as usize), truth.get(x as usize, y as usize));
        match (p, t) {
            (1, 0) => *px = FALSE_POSITIVE_COLOR,
            (0, 1) => *px = FALSE_NEGATIVE_COLOR,
            _ => {}
        }
    }
    Ok(out)
}
