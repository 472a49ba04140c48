//! The five-dimensional feature vector and its assembly from a
//! white-background and a check-background ROI pair.

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::paa::particle_pixel_count;
use crate::raster::RasterError;
use crate::roi::RoiImage;
use crate::rpa::rpa_features;
use crate::sa::{sa_feature, GroundTruthPattern, SaError, SaParams};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Sa(#[from] SaError),
}

/// The five features: three radial-profile numbers and the particle count
/// from the white capture, the grid overlap from the check capture.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector {
    pub radial_curvature: f64,
    pub radial_minimum: f64,
    pub radial_mse: f64,
    pub particle_pixel_count: f64,
    pub superposition_ratio: f64,
}

impl FeatureVector {
    pub const DIM: usize = 5;

    pub const NAMES: [&'static str; 5] = [
        "radial_curvature",
        "radial_minimum",
        "radial_mse",
        "particle_pixel_count",
        "superposition_ratio",
    ];

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.radial_curvature,
            self.radial_minimum,
            self.radial_mse,
            self.particle_pixel_count,
            self.superposition_ratio,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            radial_curvature: v[0],
            radial_minimum: v[1],
            radial_mse: v[2],
            particle_pixel_count: v[3],
            superposition_ratio: v[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Runs RPA and PAA on the white ROI and SA on the check ROI.
pub fn assemble_features(
    white_roi: &RoiImage,
    check_roi: &RoiImage,
    truth: &GroundTruthPattern,
    cfg: &PipelineConfig,
) -> Result<FeatureVector, FeatureError> {
    let rpa = rpa_features(white_roi);
    let count = particle_pixel_count(white_roi, &cfg.paa)?;
    let ratio = sa_feature(check_roi, truth, &SaParams::from_config(cfg))?;
    Ok(FeatureVector {
        radial_curvature: rpa.radial_curvature,
        radial_minimum: rpa.radial_minimum,
        radial_mse: rpa.radial_mse,
        particle_pixel_count: count as f64,
        superposition_ratio: ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_round_trip() {
        let f = FeatureVector {
            radial_curvature: -1.5,
            radial_minimum: 210.0,
            radial_mse: 3.25,
            particle_pixel_count: 1234.0,
            superposition_ratio: 0.87,
        };
        assert_eq!(FeatureVector::from_array(f.as_array()), f);
        assert!(f.is_finite());
        let bad = FeatureVector {
            radial_mse: f64::NAN,
            ..f
        };
        assert!(!bad.is_finite());
    }
}
