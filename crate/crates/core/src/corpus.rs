//! Dataset manifests, deterministic train/test splits, and mask/image I/O.
//!
//! A manifest is a JSON-lines file, one sample per line:
//!
//! ```text
//! {"id":"s001","image_path":"img/s001.png","mask_path":"mask/s001.png","dataset":"synth","subject":"7","spectrum":"NIR"}
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Optional
//! `x_min`, `y_min`, `x_max`, `y_max` fields carry an iris box annotation.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, GrayImage, Luma, RgbImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::nn::Tensor;

/// Imaging domain of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spectrum {
    #[serde(rename = "NIR")]
    Nir,
    #[serde(rename = "VIS")]
    Vis,
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spectrum::Nir => "NIR",
            Spectrum::Vis => "VIS",
        })
    }
}

impl FromStr for Spectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NIR" => Ok(Spectrum::Nir),
            "VIS" => Ok(Spectrum::Vis),
            other => Err(Error::Config(format!("unknown spectrum `{other}`"))),
        }
    }
}

/// Iris box annotation, max-exclusive pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// One manifest line as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    pub dataset: String,
    pub subject: String,
    pub spectrum: Spectrum,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
}

/// An eye image with its metadata and resolved paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSample {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub dataset: String,
    pub subject: String,
    pub spectrum: Spectrum,
    pub width: usize,
    pub height: usize,
    pub roi_box: Option<BoxAnnotation>,
}

impl ImageSample {
    pub fn load_image(&self) -> Result<RgbImage> {
        load_rgb(&self.image_path)
    }

    /// Loads the ground-truth mask and checks it matches the image size.
    pub fn load_mask(&self) -> Result<BinaryMask> {
        let path = self
            .mask_path
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("sample `{}` has no mask", self.id)))?;
        let mask = load_mask(path)?;
        if mask.dims() != (self.width, self.height) {
            return Err(Error::Validation(format!(
                "mask of `{}` is {}x{} but image is {}x{}",
                self.id,
                mask.width(),
                mask.height(),
                self.width,
                self.height
            )));
        }
        Ok(mask)
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ImageSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate sample id `{}` at line {line_no}",
                entry.id
            )));
        }
        samples.push(resolve_entry(entry, base, line_no)?);
    }
    Ok(samples)
}

fn resolve_entry(entry: ManifestEntry, base: &Path, line: usize) -> Result<ImageSample> {
    let image_path = base.join(&entry.image_path);
    let (w, h) = image::image_dimensions(&image_path).map_err(|e| Error::image(&image_path, e))?;
    if w == 0 || h == 0 {
        return Err(Error::Validation(format!("image `{}` has zero area", entry.id)));
    }
    let roi_box = match (entry.x_min, entry.y_min, entry.x_max, entry.y_max) {
        (Some(x_min), Some(y_min), Some(x_max), Some(y_max)) => Some(BoxAnnotation {
            x_min,
            y_min,
            x_max,
            y_max,
        }),
        (None, None, None, None) => None,
        _ => {
            return Err(Error::Parse {
                line,
                message: "box annotation needs all of x_min, y_min, x_max, y_max".into(),
            })
        }
    };
    let mask_path = entry.mask_path.map(|p| base.join(p));
    if let Some(mp) = &mask_path {
        let dims = image::image_dimensions(mp).map_err(|e| Error::image(mp, e))?;
        if dims != (w, h) {
            return Err(Error::Validation(format!(
                "line {line}: mask of `{}` is {}x{} but image is {w}x{h}",
                entry.id, dims.0, dims.1
            )));
        }
    }
    Ok(ImageSample {
        id: entry.id,
        image_path,
        mask_path,
        dataset: entry.dataset,
        subject: entry.subject,
        spectrum: entry.spectrum,
        width: w as usize,
        height: h as usize,
        roi_box,
    })
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).expect("manifest entries serialize");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Train/test partition of sample ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

impl SplitSpec {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Checks the split partitions exactly the given ids.
    pub fn validate_against(&self, ids: &[&str]) -> Result<()> {
        let train: BTreeSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = self.test_ids.iter().map(String::as_str).collect();
        if let Some(both) = train.intersection(&test).next() {
            return Err(Error::Validation(format!("id `{both}` is in both train and test")));
        }
        let all: BTreeSet<&str> = ids.iter().copied().collect();
        let covered: BTreeSet<&str> = train.union(&test).copied().collect();
        if all != covered {
            let diff: Vec<&str> = all.symmetric_difference(&covered).copied().collect();
            return Err(Error::Validation(format!(
                "split does not cover the sample set; mismatched ids: {diff:?}"
            )));
        }
        Ok(())
    }
}

/// Random image-level split: a seeded permutation of the ids, with the first
/// `round(train_fraction * n)` (half-up) going to training. Both sides keep
/// manifest order.
pub fn split_dataset(samples: &[ImageSample], seed: u64, train_fraction: f64) -> Result<SplitSpec> {
    let ids: Vec<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    split_ids(&ids, seed, train_fraction)
}

pub fn split_ids(ids: &[&str], seed: u64, train_fraction: f64) -> Result<SplitSpec> {
    if ids.is_empty() {
        return Err(Error::Validation("cannot split an empty sample list".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = ids.len();
    let n_train = (train_fraction * n as f64 + 0.5).floor() as usize;
    if n_train >= n {
        return Err(Error::Validation(format!(
            "{n} sample(s) at fraction {train_fraction} leave the test set empty"
        )));
    }
    if n_train == 0 {
        return Err(Error::Validation(format!(
            "{n} sample(s) at fraction {train_fraction} leave the training set empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (i, id) in ids.iter().enumerate() {
        if in_train[i] {
            train_ids.push(id.to_string());
        } else {
            test_ids.push(id.to_string());
        }
    }
    Ok(SplitSpec {
        train_fraction,
        seed,
        train_ids,
        test_ids,
    })
}

/// Reads a grayscale mask, thresholding intensities at 128.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = single_channel(img, path)?;
    let (w, h) = gray.dimensions();
    let labels = gray.pixels().map(|p| (p.0[0] >= 128) as u8).collect();
    BinaryMask::new(w as usize, h as usize, labels)
}

fn single_channel(img: DynamicImage, path: &Path) -> Result<GrayImage> {
    match img {
        DynamicImage::ImageLuma8(g) => Ok(g),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            Ok(img.to_luma8())
        }
        other => {
            let rgb = other.to_rgb8();
            if rgb.pixels().any(|p| p.0[0] != p.0[1] || p.0[1] != p.0[2]) {
                return Err(Error::Validation(format!(
                    "{}: mask has unequal color channels",
                    path.display()
                )));
            }
            Ok(GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                Luma([rgb.get_pixel(x, y).0[0]])
            }))
        }
    }
}

/// Writes a single-channel 8-bit mask image (1 -> 255, 0 -> 0).
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    mask_to_gray(mask)
        .save(path)
        .map_err(|e| Error::image(path, e))
}

pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([mask.get(x as usize, y as usize) * 255])
    })
}

/// Loads any image as 8-bit RGB (grayscale is replicated).
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8())
}

/// Network input encoding: 3 channels, `value / 255 - 0.5`.
pub fn rgb_to_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    Tensor::from_fn(3, h, w, |c, y, x| {
        img.get_pixel(x as u32, y as u32).0[c] as f32 / 255.0 - 0.5
    })
}

/// An image with its ground-truth mask, ready for training or scoring.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: String,
    pub image: RgbImage,
    pub mask: BinaryMask,
}

/// Loads image and mask for every sample. Samples without a mask are
/// reported together in one validation error.
pub fn load_labeled(samples: &[ImageSample]) -> Result<Vec<LabeledImage>> {
    let missing: Vec<&str> = samples
        .iter()
        .filter(|s| s.mask_path.is_none())
        .map(|s| s.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!("samples without mask: {missing:?}")));
    }
    samples
        .iter()
        .map(|s| {
            Ok(LabeledImage {
                id: s.id.clone(),
                image: s.load_image()?,
                mask: s.load_mask()?,
            })
        })
        .collect()
}
