//! End-to-end analysis: a white/check frame pair in, five features and a
//! verdict out. Also the bulk feature-extraction paths used for training.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::dataset::{CaseRecord, DatasetError, Label, Scenario};
use crate::eval::FeatureCase;
use crate::features::{assemble_features, FeatureError, FeatureVector};
use crate::raster::{BinaryMask, Raster};
use crate::roi::{preprocess_frame, RoiError, RoiImage};
use crate::sa::{analytic_grid, calibration_grid, GroundTruthPattern};
use crate::svm::{SvmError, SvmModel};
use crate::synth::{render_scene, SceneParams, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("preprocess: {0}")]
    Roi(#[from] RoiError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("classifier: {0}")]
    Svm(#[from] SvmError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("scene: {0}")]
    Synth(#[from] SynthError),
    #[error("ground-truth mask is {0}x{1} but the cropped frame is {2}x{2}")]
    GroundTruthShape(u32, u32, u32),
}

/// Everything the pipeline learned about one frame pair.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub features: FeatureVector,
    pub label: Label,
    pub white_roi: RoiImage,
    pub check_roi: RoiImage,
}

/// Builds the ground-truth grid for a check ROI: the analytic grid
/// registered to the detected circle, unless a calibration mask overrides
/// it. Full-frame calibration masks are center-cropped to the working
/// frame first.
pub fn ground_truth_for(
    check_roi: &RoiImage,
    cfg: &PipelineConfig,
    calibration: Option<&BinaryMask>,
) -> Result<GroundTruthPattern, PipelineError> {
    match calibration {
        Some(mask) => {
            let side = check_roi.img.width();
            let cropped;
            let mask = if mask.width() == side && mask.height() == check_roi.img.height() {
                mask
            } else if mask.width() >= side && mask.height() >= side {
                let raster = crate::raster::crop_center(&mask.to_raster(), side)
                    .map_err(|e| PipelineError::Feature(FeatureError::Raster(e)))?;
                cropped = BinaryMask::from_raster(&raster)
                    .map_err(|e| PipelineError::Feature(FeatureError::Raster(e)))?;
                &cropped
            } else {
                return Err(PipelineError::GroundTruthShape(
                    mask.width(),
                    mask.height(),
                    side,
                ));
            };
            Ok(calibration_grid(mask, &check_roi.circle))
        }
        None => Ok(analytic_grid(
            check_roi.img.width(),
            check_roi.img.height(),
            &check_roi.circle,
            cfg.sa.grid.pitch,
            cfg.sa.grid.thickness,
        )),
    }
}

/// Extracts the five features from a raw white/check frame pair.
pub fn extract_pair_features(
    white: &Raster,
    check: &Raster,
    cfg: &PipelineConfig,
    calibration: Option<&BinaryMask>,
) -> Result<(FeatureVector, RoiImage, RoiImage), PipelineError> {
    let pre = cfg.preprocess();
    let white_roi = preprocess_frame(white, &pre)?;
    let check_roi = preprocess_frame(check, &pre)?;
    let truth = ground_truth_for(&check_roi, cfg, calibration)?;
    let features = assemble_features(&white_roi, &check_roi, &truth, cfg)?;
    Ok((features, white_roi, check_roi))
}

/// Full analysis of a frame pair with a trained model.
pub fn analyze_pair(
    white: &Raster,
    check: &Raster,
    model: &SvmModel,
    cfg: &PipelineConfig,
    calibration: Option<&BinaryMask>,
) -> Result<Analysis, PipelineError> {
    let (features, white_roi, check_roi) = extract_pair_features(white, check, cfg, calibration)?;
    let label = model.classify(&features)?;
    Ok(Analysis {
        features,
        label,
        white_roi,
        check_roi,
    })
}

/// Loads every manifest case (honoring its augmentation tag) and extracts
/// features, in parallel.
pub fn case_features(
    records: &[CaseRecord],
    base_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<FeatureCase>, PipelineError> {
    records
        .par_iter()
        .map(|rec| {
            let (white, check) = rec.load_images(base_dir)?;
            let (features, _, _) = extract_pair_features(&white, &check, cfg, None)?;
            Ok(FeatureCase {
                features,
                label: rec.label,
                group_id: rec.source_id().to_string(),
            })
        })
        .collect()
}

/// Renders scenes in memory (optionally with the four flip variants) and
/// extracts features, in parallel. The test-oracle path: no files touched,
/// each scene rendered once and flipped for its variants.
pub fn scene_case_features(
    scenes: &[(SceneParams, Label, Scenario)],
    augment: bool,
    cfg: &PipelineConfig,
) -> Result<Vec<FeatureCase>, PipelineError> {
    let per_scene: Vec<Vec<FeatureCase>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, (params, label, _))| {
            let rendered = render_scene(params)?;
            let augs: &[crate::dataset::Augmentation] = if augment {
                &crate::dataset::Augmentation::ALL
            } else {
                std::slice::from_ref(&crate::dataset::Augmentation::Identity)
            };
            augs.iter()
                .map(|&aug| {
                    let white = aug.apply(&rendered.white);
                    let check = aug.apply(&rendered.check);
                    let (features, _, _) = extract_pair_features(&white, &check, cfg, None)?;
                    Ok(FeatureCase {
                        features,
                        label: *label,
                        group_id: format!("scene{i:05}"),
                    })
                })
                .collect()
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(per_scene.into_iter().flatten().collect())
}
