//! Vision pipeline and classifier for flask solubility analysis.
//!
//! A solution photographed against a white and a check (grid) background is
//! reduced to five features and classified as Pass (clear), Fail 1 (turbid)
//! or Fail 2 (undissolved particles):
//!
//! 1. **raster / threshold / edges / morph** – image containers and the
//!    pixel-level primitives (grayscale, crop, rotation, adaptive
//!    thresholding, Canny, binary morphology, flips).
//! 2. **hough / roi** – circular region-of-interest detection in a frame.
//! 3. **rpa** – quadratic fit to averaged diameter intensity profiles
//!    (curvature, minimum, fit error).
//! 4. **paa** – undissolved-particle pixel counting.
//! 5. **ppht / sa** – grid-pattern recovery through the solution and its
//!    overlap with the expected grid (turbidity proxy).
//! 6. **svm / eval / dataset** – linear one-vs-rest classifier, confusion
//!    matrices, stratified k-fold validation, flip augmentation.
//! 7. **synth** – parametric scene renderer used as the test oracle and
//!    by the camera emulator.
//! 8. **config / pipeline** – tunable parameters and the end-to-end
//!    image-pair analysis.

pub mod config;
pub mod dataset;
pub mod edges;
pub mod eval;
pub mod features;
pub mod hough;
pub mod morph;
pub mod paa;
pub mod pipeline;
pub mod ppht;
pub mod raster;
pub mod roi;
pub mod rpa;
pub mod sa;
pub mod svm;
pub mod synth;
pub mod threshold;

pub use raster::{BinaryMask, Raster, RasterError};
