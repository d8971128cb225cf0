//! Iris region of interest: detection selection and the square crop window
//! handed to the segmenters.
//!
//! A detection passes the confidence gate at `>= 0.25`; of the survivors
//! only the most confident is kept. Its box is padded by 10% per side,
//! grown to the smallest enclosing power-of-two square, and shifted to lie
//! inside the image. With no surviving detection the whole image is used.

mod detector;

pub use detector::{
    anchor_kmeans, derive_box, DetectorConfig, DetectorExample, DetectorSpec, DetectorTrainConfig,
    IrisDetector, LayerKind, LayerSpec, DETECTOR_INPUT, DETECTOR_KIND, GRID, NUM_ANCHORS, OUTPUT_CHANNELS,
};
pub use detector::train_detector;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.25;
pub const DEFAULT_PAD_FRACTION: f64 = 0.10;

/// Axis-aligned box in pixel coordinates, max-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn clamp_to(&self, width: usize, height: usize) -> BBox {
        let (w, h) = (width as f64, height as f64);
        BBox::new(
            self.x_min.clamp(0.0, w),
            self.y_min.clamp(0.0, h),
            self.x_max.clamp(0.0, w),
            self.y_max.clamp(0.0, h),
        )
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Validation(format!("invalid box {self:?}")));
        }
        if self.x_min < 0.0 || self.y_min < 0.0 || self.x_max > width as f64 || self.y_max > height as f64 {
            return Err(Error::Validation(format!(
                "box {self:?} lies outside the {width}x{height} image"
            )));
        }
        Ok(())
    }
}

/// Detector output: a box on the original image with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Outcome of [`select_detection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Detected(Detection),
    /// Nothing cleared the threshold: segment the full image.
    Fallback,
}

/// Drops detections below `threshold` and returns the most confident
/// survivor; on ties the earliest one wins.
pub fn select_detection(detections: &[Detection], threshold: f64) -> Selection {
    let mut best: Option<&Detection> = None;
    for d in detections.iter().filter(|d| d.confidence >= threshold) {
        if best.is_none_or(|b| d.confidence > b.confidence) {
            best = Some(d);
        }
    }
    best.map_or(Selection::Fallback, |d| Selection::Detected(*d))
}

/// Square crop window in integer pixels, max-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
    /// Power-of-two side of the square (the image's larger side on fallback).
    pub side: usize,
    pub is_fallback: bool,
    /// The square was wider than the image and was cut to its width.
    pub clamped_x: bool,
    /// The square was taller than the image and was cut to its height.
    pub clamped_y: bool,
}

impl RoiBox {
    pub fn full_image(width: usize, height: usize) -> Self {
        Self {
            x_min: 0,
            y_min: 0,
            x_max: width,
            y_max: height,
            side: width.max(height),
            is_fallback: true,
            clamped_x: false,
            clamped_y: false,
        }
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min
    }

    pub fn is_clamped(&self) -> bool {
        self.clamped_x || self.clamped_y
    }
}

/// Crop window for a selection: padded power-of-two square or full image.
pub fn roi_for(selection: &Selection, image_size: (usize, usize), pad_fraction: f64) -> Result<RoiBox> {
    match selection {
        Selection::Fallback => Ok(RoiBox::full_image(image_size.0, image_size.1)),
        Selection::Detected(d) => pad_and_square(&d.bbox.clamp_to(image_size.0, image_size.1), image_size, pad_fraction),
    }
}

/// Grows `bbox` by `pad_fraction` of its size on every side, snaps it
/// outward to whole pixels, and encloses it in the smallest power-of-two
/// square, centered on the padded box and shifted to stay inside the image.
///
/// A square larger than the image on some axis is cut to the image on that
/// axis and flagged in `clamped_x` / `clamped_y`.
pub fn pad_and_square(bbox: &BBox, image_size: (usize, usize), pad_fraction: f64) -> Result<RoiBox> {
    let (width, height) = image_size;
    if width == 0 || height == 0 {
        return Err(Error::Validation("image has zero area".into()));
    }
    bbox.validate(width, height)?;
    if !(pad_fraction >= 0.0 && pad_fraction.is_finite()) {
        return Err(Error::Validation(format!("pad fraction must be >= 0, got {pad_fraction}")));
    }
    let pad_x = bbox.width() * pad_fraction;
    let pad_y = bbox.height() * pad_fraction;
    let px0 = (bbox.x_min - pad_x).floor() as i64;
    let px1 = (bbox.x_max + pad_x).ceil() as i64;
    let py0 = (bbox.y_min - pad_y).floor() as i64;
    let py1 = (bbox.y_max + pad_y).ceil() as i64;
    let extent = (px1 - px0).max(py1 - py0).max(1) as usize;
    let side = extent.next_power_of_two();

    let (x_min, x_max, clamped_x) = place_axis(px0, px1, side, width);
    let (y_min, y_max, clamped_y) = place_axis(py0, py1, side, height);
    Ok(RoiBox {
        x_min,
        y_min,
        x_max,
        y_max,
        side,
        is_fallback: false,
        clamped_x,
        clamped_y,
    })
}

/// Places a `side`-long window over the padded interval `[lo, hi)` on an
/// axis of length `len`.
fn place_axis(lo: i64, hi: i64, side: usize, len: usize) -> (usize, usize, bool) {
    if side > len {
        return (0, len, true);
    }
    let side_i = side as i64;
    let len_i = len as i64;
    // Padding may run past the border; containment is only owed to the
    // in-image part of the padded interval.
    let (lo_in, hi_in) = (lo.max(0), hi.min(len_i));
    let centered = ((lo + hi) as f64 / 2.0 - side as f64 / 2.0 + 0.5).floor() as i64;
    let earliest = (hi_in - side_i).max(0);
    let latest = lo_in.min(len_i - side_i);
    let start = centered.clamp(earliest, latest.max(earliest));
    (start as usize, (start + side_i) as usize, false)
}

/// Offsets needed to paste a crop-sized mask back onto the full image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiTransform {
    pub x_offset: usize,
    pub y_offset: usize,
    pub width: usize,
    pub height: usize,
    pub full_width: usize,
    pub full_height: usize,
}

impl RoiTransform {
    pub fn is_identity(&self) -> bool {
        self.x_offset == 0 && self.y_offset == 0 && self.width == self.full_width && self.height == self.full_height
    }

    /// Crop-space mask to a full-resolution mask, zero outside the crop.
    pub fn paste(&self, crop_mask: &BinaryMask) -> Result<BinaryMask> {
        if crop_mask.dims() != (self.width, self.height) {
            return Err(Error::Validation(format!(
                "mask {}x{} does not match crop {}x{}",
                crop_mask.width(),
                crop_mask.height(),
                self.width,
                self.height
            )));
        }
        Ok(crop_mask.paste_into(self.x_offset, self.y_offset, self.full_width, self.full_height))
    }

    pub fn crop_mask(&self, full: &BinaryMask) -> BinaryMask {
        full.crop(self.x_offset, self.y_offset, self.width, self.height)
    }
}

pub fn roi_transform(roi: &RoiBox, full_width: usize, full_height: usize) -> RoiTransform {
    RoiTransform {
        x_offset: roi.x_min,
        y_offset: roi.y_min,
        width: roi.width(),
        height: roi.height(),
        full_width,
        full_height,
    }
}

/// Pixel-exact crop of `image` to `roi` plus the inverse transform.
pub fn crop_roi(image: &RgbImage, roi: &RoiBox) -> (RgbImage, RoiTransform) {
    let t = roi_transform(roi, image.width() as usize, image.height() as usize);
    let crop = image::imageops::crop_imm(
        image,
        t.x_offset as u32,
        t.y_offset as u32,
        t.width as u32,
        t.height as u32,
    )
    .to_image();
    (crop, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(conf: f64, x: f64) -> Detection {
        Detection {
            bbox: BBox::new(x, 0.0, x + 10.0, 10.0),
            confidence: conf,
        }
    }

    #[test]
    fn selection_examples() {
        let a = det(0.9, 0.0);
        let b = det(0.6, 50.0);
        assert_eq!(select_detection(&[a, b], 0.25), Selection::Detected(a));
        assert_eq!(select_detection(&[det(0.2, 0.0)], 0.25), Selection::Fallback);
        assert_eq!(select_detection(&[], 0.25), Selection::Fallback);
        assert_eq!(select_detection(&[det(0.25, 3.0)], 0.25), Selection::Detected(det(0.25, 3.0)));
        let tie = [det(0.5, 1.0), det(0.5, 2.0)];
        assert_eq!(select_detection(&tie, 0.25), Selection::Detected(tie[0]));
    }

    #[test]
    fn worked_square_example() {
        let roi = pad_and_square(&BBox::new(100.0, 100.0, 200.0, 180.0), (640, 480), 0.10).unwrap();
        assert_eq!(roi.side, 128);
        assert_eq!((roi.x_min, roi.y_min, roi.x_max, roi.y_max), (86, 76, 214, 204));
        assert!(!roi.is_fallback && !roi.is_clamped());
    }

    #[test]
    fn power_of_two_box_is_kept() {
        let roi = pad_and_square(&BBox::new(10.0, 20.0, 74.0, 84.0), (640, 480), 0.0).unwrap();
        assert_eq!((roi.x_min, roi.y_min, roi.x_max, roi.y_max, roi.side), (10, 20, 74, 84, 64));
    }

    #[test]
    fn oversized_square_is_clamped_to_the_image() {
        let roi = pad_and_square(&BBox::new(0.0, 0.0, 300.0, 240.0), (320, 240), 0.10).unwrap();
        assert_eq!(roi.side, 512);
        assert_eq!((roi.x_min, roi.y_min, roi.x_max, roi.y_max), (0, 0, 320, 240));
        assert!(roi.clamped_x && roi.clamped_y && !roi.is_fallback);
    }

    #[test]
    fn square_is_shifted_inside_near_borders() {
        let roi = pad_and_square(&BBox::new(600.0, 440.0, 640.0, 480.0), (640, 480), 0.10).unwrap();
        assert_eq!(roi.side, 64);
        assert_eq!((roi.x_max, roi.y_max), (640, 480));
    }

    #[test]
    fn invalid_boxes_are_rejected() {
        assert!(pad_and_square(&BBox::new(5.0, 5.0, 5.0, 9.0), (10, 10), 0.1).is_err());
        assert!(pad_and_square(&BBox::new(5.0, 5.0, 12.0, 9.0), (10, 10), 0.1).is_err());
        assert!(pad_and_square(&BBox::new(1.0, 1.0, 2.0, 2.0), (10, 10), -0.1).is_err());
    }

    #[test]
    fn full_image_crop_is_identity() {
        let img = RgbImage::from_fn(7, 5, |x, y| image::Rgb([x as u8, y as u8, 3]));
        let roi = RoiBox::full_image(7, 5);
        let (crop, t) = crop_roi(&img, &roi);
        assert_eq!(crop, img);
        assert!(t.is_identity());
    }

    #[test]
    fn crop_matches_direct_indexing() {
        let img = RgbImage::from_fn(32, 32, |x, y| image::Rgb([(x * 7) as u8, (y * 5) as u8, (x + y) as u8]));
        let roi = RoiBox {
            x_min: 10,
            y_min: 10,
            x_max: 20,
            y_max: 20,
            side: 10,
            is_fallback: false,
            clamped_x: false,
            clamped_y: false,
        };
        let (crop, t) = crop_roi(&img, &roi);
        assert_eq!(crop.dimensions(), (10, 10));
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(crop.get_pixel(x, y), img.get_pixel(x + 10, y + 10));
            }
        }
        let full = BinaryMask::from_fn(32, 32, |x, y| (x * y) % 3 == 1);
        let back = t.paste(&t.crop_mask(&full)).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let inside = (10..20).contains(&x) && (10..20).contains(&y);
                assert_eq!(back.get(x, y), if inside { full.get(x, y) } else { 0 });
            }
        }
    }
}
