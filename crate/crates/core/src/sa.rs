//! Superposition analysis: recover the displayed check (grid) pattern as
//! seen through the solution and score how much of the expected grid
//! survives. Turbid solutions obscure the grid; the overlap ratio drops.

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::morph::{close, dilate, Kernel};
use crate::ppht::{detect_segments, LineSegment, PphtParams};
use crate::raster::{BinaryMask, RasterError};
use crate::roi::{Circle, RoiImage};
use crate::threshold::adaptive_threshold;
use crate::edges::canny;

/// Pixels trimmed off the ROI rim before comparing against the expected
/// grid; segment walking degrades right at the mask boundary.
pub const GRID_RIM_MARGIN: f64 = 6.0;

#[derive(Debug, Error)]
pub enum SaError {
    #[error("mask shapes differ: {0}x{1} vs {2}x{3}")]
    MaskShapeMismatch(u32, u32, u32, u32),
    #[error("ground-truth pattern has no set bits")]
    EmptyGroundTruth,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Grid pattern recovered from a check-background capture.
#[derive(Debug, Clone)]
pub struct CheckPatternMask {
    pub mask: BinaryMask,
    pub segments: Vec<LineSegment>,
}

/// Where a ground-truth pattern came from.
#[derive(Debug, Clone)]
pub enum GtSource {
    /// Captured from an empty flask and thresholded.
    Calibration,
    /// Synthesized grid registered to the detected circle.
    AnalyticGrid {
        pitch: f64,
        thickness: f64,
        origin: (f64, f64),
    },
}

/// The pattern the display is known to show, restricted to the ROI.
#[derive(Debug, Clone)]
pub struct GroundTruthPattern {
    pub mask: BinaryMask,
    pub source: GtSource,
}

/// Stage parameters for [`detect_check_pattern`], assembled from the
/// pipeline config.
#[derive(Debug, Clone)]
pub struct SaParams {
    pub threshold_window: u32,
    pub threshold_offset: f64,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub ppht: PphtParams,
    pub morph_kernel: u32,
    pub dilate_iters: u32,
    pub grid_pitch: f64,
    pub grid_thickness: f64,
}

impl SaParams {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            threshold_window: cfg.threshold.window,
            threshold_offset: cfg.threshold.offset,
            canny_sigma: cfg.canny.sigma,
            canny_low: cfg.canny.low,
            canny_high: cfg.canny.high,
            ppht: PphtParams {
                threshold: cfg.sa.ppht.threshold,
                min_len: cfg.sa.ppht.min_len,
                max_gap: cfg.sa.ppht.max_gap,
                seed: cfg.sa.seed,
            },
            morph_kernel: cfg.morph.kernel,
            dilate_iters: cfg.morph.dilate_iters,
            grid_pitch: cfg.sa.grid.pitch,
            grid_thickness: cfg.sa.grid.thickness,
        }
    }
}

impl Default for SaParams {
    fn default() -> Self {
        Self::from_config(&PipelineConfig::default())
    }
}

/// True when a point at offset (du) from the grid origin sits on a line of
/// the 1-D line family with the given pitch and thickness. Shared with the
/// scene renderer so detector and oracle agree on geometry.
#[inline]
pub fn on_grid_line(du: f64, pitch: f64, thickness: f64) -> bool {
    let m = du.rem_euclid(pitch);
    m.min(pitch - m) <= thickness / 2.0
}

/// Both-direction grid membership at offset (dx, dy) from the origin.
#[inline]
pub fn on_grid(dx: f64, dy: f64, pitch: f64, thickness: f64) -> bool {
    on_grid_line(dx, pitch, thickness) || on_grid_line(dy, pitch, thickness)
}

/// Analytic ground-truth grid anchored at the circle center, restricted to
/// the circle shrunk by `GRID_RIM_MARGIN`.
pub fn analytic_grid(
    width: u32,
    height: u32,
    circle: &Circle,
    pitch: f64,
    thickness: f64,
) -> GroundTruthPattern {
    let mut mask = BinaryMask::new(width, height);
    let rim = circle.r - GRID_RIM_MARGIN;
    let rim2 = rim * rim;
    for y in 0..height {
        let dy = y as f64 - circle.cy;
        for x in 0..width {
            let dx = x as f64 - circle.cx;
            if dx * dx + dy * dy <= rim2 && on_grid(dx, dy, pitch, thickness) {
                mask.set(x, y, true);
            }
        }
    }
    GroundTruthPattern {
        mask,
        source: GtSource::AnalyticGrid {
            pitch,
            thickness,
            origin: (circle.cx, circle.cy),
        },
    }
}

/// Ground truth from a calibration capture: any set bit of the provided
/// mask inside the rim-shrunk ROI.
pub fn calibration_grid(mask: &BinaryMask, circle: &Circle) -> GroundTruthPattern {
    let mut out = BinaryMask::new(mask.width(), mask.height());
    let rim = circle.r - GRID_RIM_MARGIN;
    let rim2 = rim * rim;
    for y in 0..mask.height() {
        let dy = y as f64 - circle.cy;
        for x in 0..mask.width() {
            let dx = x as f64 - circle.cx;
            if mask.get(x, y) && dx * dx + dy * dy <= rim2 {
                out.set(x, y, true);
            }
        }
    }
    GroundTruthPattern {
        mask: out,
        source: GtSource::Calibration,
    }
}

/// Recovers the visible grid inside the ROI: adaptive threshold, Canny on
/// the thresholded image, PPHT segments, then rasterization with dilation
/// and closing. An empty result is legitimate — a fully turbid solution
/// hides the grid entirely.
pub fn detect_check_pattern(
    roi: &RoiImage,
    params: &SaParams,
) -> Result<CheckPatternMask, RasterError> {
    let mut th = adaptive_threshold(
        &roi.img,
        params.threshold_window,
        params.threshold_offset,
        false,
    )?;
    th.and_with(&roi.mask);

    let mut edges = canny(
        &th.to_raster(),
        params.canny_low,
        params.canny_high,
        params.canny_sigma,
    )?;
    // The mask cut at the rim creates an artificial circular edge; clear it.
    clear_outside(&mut edges, &roi.circle, roi.circle.r - 3.0);

    let segments = detect_segments(&edges, &params.ppht);

    let mut mask = BinaryMask::new(roi.img.width(), roi.img.height());
    for seg in &segments {
        draw_segment(&mut mask, seg);
    }
    let kernel = Kernel::square(params.morph_kernel.max(1) | 1);
    // One dilation gives the segments their nominal 3 px body, the
    // configured iterations bridge to the true line, closing fills nicks.
    mask = dilate(&mask, &kernel);
    for _ in 0..params.dilate_iters {
        mask = dilate(&mask, &kernel);
    }
    mask = close(&mask, &kernel);
    mask.and_with(&roi.mask);
    Ok(CheckPatternMask { mask, segments })
}

/// Fraction of the ground-truth grid recovered by the detector.
pub fn superposition_ratio(
    detected: &CheckPatternMask,
    truth: &GroundTruthPattern,
) -> Result<f64, SaError> {
    let (dw, dh) = (detected.mask.width(), detected.mask.height());
    let (tw, th) = (truth.mask.width(), truth.mask.height());
    if (dw, dh) != (tw, th) {
        return Err(SaError::MaskShapeMismatch(dw, dh, tw, th));
    }
    let truth_count = truth.mask.popcount();
    if truth_count == 0 {
        return Err(SaError::EmptyGroundTruth);
    }
    let overlap = detected.mask.intersection_count(&truth.mask);
    Ok(overlap as f64 / truth_count as f64)
}

/// Full check-background feature: detect, then overlap with ground truth.
pub fn sa_feature(
    roi: &RoiImage,
    truth: &GroundTruthPattern,
    params: &SaParams,
) -> Result<f64, SaError> {
    let detected = detect_check_pattern(roi, params)?;
    superposition_ratio(&detected, truth)
}

fn clear_outside(mask: &mut BinaryMask, circle: &Circle, radius: f64) {
    let r2 = radius * radius;
    for y in 0..mask.height() {
        let dy = y as f64 - circle.cy;
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let dx = x as f64 - circle.cx;
                if dx * dx + dy * dy > r2 {
                    mask.set(x, y, false);
                }
            }
        }
    }
}

fn draw_segment(mask: &mut BinaryMask, seg: &LineSegment) {
    let steps = (seg.x2 - seg.x1)
        .abs()
        .max((seg.y2 - seg.y1).abs())
        .ceil()
        .max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (seg.x1 + t * (seg.x2 - seg.x1)).round();
        let y = (seg.y1 + t * (seg.y2 - seg.y1)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < mask.width() && (y as u32) < mask.height() {
            mask.set(x as u32, y as u32, true);
        }
    }
}
