use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcn::{predict_fcn, FcnModel, FCN_KIND};
use crate::gan::{predict_gan, GanState, GAN_KIND};
use crate::mask::BinaryMask;
use crate::nn::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fcn,
    Gan,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Fcn => "fcn",
            ModelKind::Gan => "gan",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fcn" => Ok(ModelKind::Fcn),
            "gan" => Ok(ModelKind::Gan),
            other => Err(Error::Config(format!("unknown model `{other}` (expected fcn or gan)"))),
        }
    }
}

/// A trained segmenter of either kind.
pub enum Segmenter {
    Fcn(FcnModel<f32>),
    Gan(GanState),
}

impl Segmenter {
    pub fn kind(&self) -> ModelKind {
        match self {
            Segmenter::Fcn(_) => ModelKind::Fcn,
            Segmenter::Gan(_) => ModelKind::Gan,
        }
    }

    /// Full-size binary mask for `image`.
    pub fn predict(&self, image: &RgbImage) -> Result<BinaryMask> {
        match self {
            Segmenter::Fcn(m) => predict_fcn(m, image),
            Segmenter::Gan(s) => predict_gan(s, image),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            Segmenter::Fcn(m) => m.save(path),
            Segmenter::Gan(s) => s.save(path),
        }
    }

    /// Loads either kind, dispatching on the checkpoint's kind tag.
    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        match ckpt.kind.as_str() {
            FCN_KIND => Ok(Segmenter::Fcn(FcnModel::from_checkpoint(&ckpt)?)),
            GAN_KIND => Ok(Segmenter::Gan(GanState::from_checkpoint(&ckpt)?)),
            other => Err(Error::Checkpoint(format!(
                "{} holds a `{other}` model, not a segmenter",
                path.display()
            ))),
        }
    }
}
