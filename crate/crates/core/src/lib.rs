//! Iris segmentation pipeline.
//!
//! Stages:
//!
//! 1. **corpus** – manifests, seeded train/test splits, mask I/O.
//! 2. **roi** – single-class iris detector and the crop-window rules
//!    (confidence gate, best detection, padding, power-of-two square).
//! 3. **fcn** – VGG-style encoder / transposed-convolution decoder segmenter.
//! 4. **gan** – conditional adversarial segmenter (U-shaped generator,
//!    patch discriminator).
//! 5. **eval** – segmentation error E, precision/recall/F1, aggregates and
//!    paired t-tests.
//! 6. **pipeline** – experiment runner, overlays, synthetic eye images.
//!
//! All networks run on a small CPU engine in [`nn`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fcn;
pub mod gan;
pub mod imaging;
pub mod mask;
pub mod nn;
pub mod pipeline;
pub mod roi;
pub mod trace;

pub use error::{Error, Result};
pub use mask::BinaryMask;
