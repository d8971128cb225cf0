//! Synthetic eye images with exact iris masks, standing in for licensed
//! iris datasets at desk scale.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{save_mask, write_manifest, ManifestEntry, Spectrum};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PARAMS_FILE: &str = "params.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub count: usize,
    pub side: usize,
    pub seed: u64,
    /// Sample `i` goes to `datasets[i % len]`.
    pub datasets: Vec<(String, Spectrum)>,
    /// Chance of an upper-eyelid band cutting into the iris.
    pub eyelid_probability: f64,
}

impl SynthOptions {
    pub fn new(count: usize, side: usize, seed: u64) -> Self {
        Self {
            count,
            side,
            seed,
            datasets: vec![("synth-nir".into(), Spectrum::Nir), ("synth-vis".into(), Spectrum::Vis)],
            eyelid_probability: 0.3,
        }
    }
}

/// Geometry used to draw one eye; the mask is derived from it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeParams {
    pub id: String,
    pub center_x: f64,
    pub center_y: f64,
    pub iris_radius: f64,
    pub pupil_radius: f64,
    /// Pixels with centre above `eyelid_y + eyelid_curve * (x - center_x)^2`
    /// are covered by the eyelid.
    pub eyelid_y: Option<f64>,
    pub eyelid_curve: f64,
}

impl EyeParams {
    fn occluded(&self, px: f64, py: f64) -> bool {
        self.eyelid_y
            .is_some_and(|ly| py < ly + self.eyelid_curve * (px - self.center_x).powi(2))
    }

    /// Ground-truth label at pixel `(x, y)`: inside the iris circle, outside
    /// the pupil, not under the eyelid. Pixel centres are at `+0.5`.
    pub fn is_iris(&self, x: usize, y: usize) -> bool {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let d = ((px - self.center_x).powi(2) + (py - self.center_y).powi(2)).sqrt();
        d < self.iris_radius && d >= self.pupil_radius && !self.occluded(px, py)
    }

    pub fn mask(&self, side: usize) -> BinaryMask {
        BinaryMask::from_fn(side, side, |x, y| self.is_iris(x, y))
    }
}

fn validate(opts: &SynthOptions) -> Result<()> {
    if opts.count == 0 {
        return Err(Error::Validation("synthetic dataset needs at least one image".into()));
    }
    if opts.side < 64 || !opts.side.is_power_of_two() {
        return Err(Error::Validation(format!("side {} must be a power of two >= 64", opts.side)));
    }
    if opts.datasets.is_empty() {
        return Err(Error::Validation("at least one dataset label is required".into()));
    }
    Ok(())
}

type Color = [f64; 3];

fn gray(v: f64) -> Color {
    [v, v, v]
}

fn draw_eye(params: &mut EyeParams, side: usize, spectrum: Spectrum, rng: &mut ChaCha8Rng, lid: bool) -> RgbImage {
    let s = side as f64;
    let nir = spectrum == Spectrum::Nir;
    let pick = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo..hi);

    // Eye geometry.
    params.center_x = s / 2.0 + pick(rng, -0.06, 0.06) * s;
    params.center_y = s / 2.0 + pick(rng, -0.06, 0.06) * s;
    params.iris_radius = pick(rng, 0.22, 0.32) * s;
    params.pupil_radius = params.iris_radius * pick(rng, 0.28, 0.5);
    let sclera_a = params.iris_radius * pick(rng, 1.5, 1.9);
    let sclera_b = params.iris_radius * pick(rng, 1.05, 1.25);
    let sclera_dx = pick(rng, -0.05, 0.05) * s;
    if lid {
        params.eyelid_y = Some(params.center_y - params.iris_radius * pick(rng, 0.35, 0.85));
        params.eyelid_curve = pick(rng, 0.0, 1.5) / s;
    } else {
        params.eyelid_y = None;
        params.eyelid_curve = 0.0;
    }

    // Colours.
    let skin: Color = if nir {
        gray(pick(rng, 110.0, 170.0))
    } else {
        [pick(rng, 170.0, 225.0), pick(rng, 120.0, 170.0), pick(rng, 95.0, 140.0)]
    };
    let sclera: Color = if nir {
        gray(pick(rng, 185.0, 230.0))
    } else {
        [pick(rng, 215.0, 245.0), pick(rng, 205.0, 235.0), pick(rng, 200.0, 230.0)]
    };
    let iris: Color = if nir {
        gray(pick(rng, 70.0, 125.0))
    } else {
        const HUES: [Color; 4] = [[120.0, 75.0, 40.0], [70.0, 110.0, 160.0], [90.0, 120.0, 70.0], [80.0, 55.0, 35.0]];
        let h = HUES[rng.random_range(0..HUES.len())];
        let k = pick(rng, 0.8, 1.2);
        [h[0] * k, h[1] * k, h[2] * k]
    };
    let pupil = gray(pick(rng, 8.0, 30.0));

    // Texture: low-frequency shading for skin, radial striations for iris.
    let (fx, fy, ph1, ph2) = (pick(rng, 2.0, 6.0), pick(rng, 2.0, 6.0), pick(rng, 0.0, 2.0 * PI), pick(rng, 0.0, 2.0 * PI));
    let spokes = rng.random_range(12..30) as f64;
    let spoke_phase = pick(rng, 0.0, 2.0 * PI);
    let noise = |rng: &mut ChaCha8Rng, amp: f64| rng.random_range(-amp..amp);

    let p = params.clone();
    let mut img = RgbImage::new(side as u32, side as u32);
    for y in 0..side {
        for x in 0..side {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (dx, dy) = (px - p.center_x, py - p.center_y);
            let d = (dx * dx + dy * dy).sqrt();
            let in_sclera = ((px - p.center_x - sclera_dx) / sclera_a).powi(2) + (dy / sclera_b).powi(2) < 1.0;
            let (base, shade) = if p.occluded(px, py) {
                (skin, 10.0 * ((px / s * fx * PI + ph1).sin() * (py / s * fy * PI + ph2).sin()) - 15.0)
            } else if d < p.pupil_radius {
                (pupil, 0.0)
            } else if d < p.iris_radius {
                let theta = dy.atan2(dx);
                let r = (d - p.pupil_radius) / (p.iris_radius - p.pupil_radius);
                (iris, 18.0 * (spokes * theta + spoke_phase + 3.0 * r).sin() - 20.0 * r)
            } else if in_sclera {
                (sclera, -12.0 * (d / sclera_a))
            } else {
                (skin, 14.0 * ((px / s * fx * PI + ph1).sin() * (py / s * fy * PI + ph2).sin()))
            };
            let n = noise(rng, 6.0);
            let c = base.map(|v| (v + shade + n).clamp(0.0, 255.0).round() as u8);
            img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }
    img
}

/// Writes `images/`, `masks/`, a manifest and the drawing parameters
/// into `output_dir`; returns the manifest path. Deterministic per seed.
pub fn generate_synthetic(opts: &SynthOptions, output_dir: &Path) -> Result<PathBuf> {
    validate(opts)?;
    let images = output_dir.join("images");
    let masks = output_dir.join("masks");
    for dir in [&images, &masks] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::with_capacity(opts.count);
    let mut params_out = Vec::new();
    for i in 0..opts.count {
        let (dataset, spectrum) = &opts.datasets[i % opts.datasets.len()];
        let id = format!("{dataset}-{i:04}");
        let lid = rng.random_bool(opts.eyelid_probability.clamp(0.0, 1.0));
        let mut params = EyeParams {
            id: id.clone(),
            center_x: 0.0,
            center_y: 0.0,
            iris_radius: 0.0,
            pupil_radius: 0.0,
            eyelid_y: None,
            eyelid_curve: 0.0,
        };
        let img = draw_eye(&mut params, opts.side, *spectrum, &mut rng, lid);
        let image_rel = PathBuf::from("images").join(format!("{id}.png"));
        let mask_rel = PathBuf::from("masks").join(format!("{id}.png"));
        let image_path = output_dir.join(&image_rel);
        img.save(&image_path).map_err(|e| Error::image(&image_path, e))?;
        save_mask(&params.mask(opts.side), &output_dir.join(&mask_rel))?;
        serde_json::to_writer(&mut params_out, &params).expect("params serialize");
        params_out.push(b'\n');
        entries.push(ManifestEntry {
            id,
            image_path: image_rel,
            mask_path: Some(mask_rel),
            dataset: dataset.clone(),
            subject: format!("subject-{:03}", i / (2 * opts.datasets.len())),
            spectrum: *spectrum,
            x_min: None,
            y_min: None,
            x_max: None,
            y_max: None,
        });
    }
    let params_path = output_dir.join(PARAMS_FILE);
    fs::write(&params_path, params_out).map_err(|e| Error::io(&params_path, e))?;
    let manifest = output_dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Two-dataset (one NIR, one VIS) synthetic corpus with default settings.
pub fn generate_synthetic_dataset(n: usize, side: usize, seed: u64, output_dir: &Path) -> Result<PathBuf> {
    generate_synthetic(&SynthOptions::new(n, side, seed), output_dir)
}

pub fn load_params(path: &Path) -> Result<Vec<EyeParams>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
