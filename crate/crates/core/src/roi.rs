//! Circular region-of-interest extraction: locate the solution disk in a
//! captured frame and mask everything else out.

use thiserror::Error;

use crate::config::PreprocessConfig;
use crate::hough::{self, HoughOptions};
use crate::raster::{crop_center, to_grayscale, BinaryMask, Raster, RasterError};

#[derive(Debug, Error)]
pub enum RoiError {
    #[error("no circle found above the vote-score floor")]
    NoCircleFound,
    #[error("roi degenerate after shrink: radius {0:.2} px")]
    DegenerateRoi(f64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Detected solution circle, sub-pixel center and radius in frame pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    /// Euclidean distance from the center to (x, y).
    #[inline]
    pub fn dist(&self, x: f64, y: f64) -> f64 {
        ((x - self.cx).powi(2) + (y - self.cy).powi(2)).sqrt()
    }

    /// True when the circle lies fully inside a w x h frame.
    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.r > 0.0
            && self.cx - self.r >= 0.0
            && self.cy - self.r >= 0.0
            && self.cx + self.r <= (width - 1) as f64
            && self.cy + self.r <= (height - 1) as f64
    }
}

/// Gray frame plus the validity mask of its solution circle. All feature
/// statistics are restricted to set mask bits.
#[derive(Debug, Clone)]
pub struct RoiImage {
    pub img: Raster,
    pub circle: Circle,
    pub mask: BinaryMask,
}

impl RoiImage {
    /// Number of pixels inside the region of interest.
    pub fn area(&self) -> usize {
        self.mask.popcount()
    }
}

/// Builds the ROI mask from a detected circle, shrinking the radius by
/// `shrink` (fraction) to keep the flask wall out of the statistics.
pub fn extract_roi(img: &Raster, circle: Circle, shrink: f64) -> Result<RoiImage, RoiError> {
    let r = circle.r * (1.0 - shrink);
    if r <= 2.0 {
        return Err(RoiError::DegenerateRoi(r));
    }
    let gray = to_grayscale(img);
    let shrunk = Circle::new(circle.cx, circle.cy, r);
    let mut mask = BinaryMask::new(gray.width(), gray.height());
    let r2 = r * r;
    for y in 0..gray.height() {
        let dy = y as f64 - shrunk.cy;
        for x in 0..gray.width() {
            let dx = x as f64 - shrunk.cx;
            mask.set(x, y, dx * dx + dy * dy <= r2);
        }
    }
    Ok(RoiImage {
        img: gray,
        circle: shrunk,
        mask,
    })
}

/// Full preprocessing of a raw capture: grayscale, center crop, circle
/// detection, ROI masking.
pub fn preprocess_frame(raw: &Raster, cfg: &PreprocessConfig) -> Result<RoiImage, RoiError> {
    let gray = to_grayscale(raw);
    let cropped = crop_center(&gray, cfg.crop_side)?;
    let side = cfg.crop_side as f64;
    let opts = HoughOptions {
        min_score: cfg.hough_min_score,
        canny_low: cfg.canny_low,
        canny_high: cfg.canny_high,
        sigma: cfg.canny_sigma,
    };
    let circle = hough::hough_circle(
        &cropped,
        cfg.hough_r_min_frac * side,
        cfg.hough_r_max_frac * side,
        &opts,
    )?;
    extract_roi(&cropped, circle, cfg.roi_shrink)
}
