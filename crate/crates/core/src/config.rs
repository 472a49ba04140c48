//! Pipeline configuration: one TOML file, every key overridable, hashable
//! so records can pin the exact parameters they were produced with.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! section {
    ($name:ident { $($(#[$doc:meta])* $field:ident : $ty:ty = $default:expr),+ $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $($(#[$doc])* pub $field: $ty,)+
        }
        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)+ }
            }
        }
    };
}

section!(CropCfg {
    /// Side of the square center crop applied to raw frames.
    side: u32 = 900,
});

section!(CannyCfg {
    sigma: f64 = 1.4,
    low: f64 = 50.0,
    high: f64 = 150.0,
});

section!(ThresholdCfg {
    /// Adaptive-threshold window (odd pixels).
    window: u32 = 31,
    offset: f64 = 10.0,
});

section!(MorphCfg {
    /// Structuring-element side for pattern cleanup.
    kernel: u32 = 3,
    dilate_iters: u32 = 2,
});

section!(HoughCfg {
    r_min_frac: f64 = 0.30,
    r_max_frac: f64 = 0.48,
    min_score: f64 = 0.25,
});

section!(RoiCfg {
    /// Radius fraction removed to exclude the flask wall.
    shrink: f64 = 0.05,
});

section!(PaaCfg {
    window: u32 = 31,
    offset: f64 = 10.0,
    /// Pixels next to the ROI rim dropped from the particle mask.
    edge_margin: f64 = 3.0,
    /// Select bright instead of dark particles.
    invert: bool = false,
});

section!(PphtCfg {
    threshold: u32 = 30,
    min_len: f64 = 20.0,
    max_gap: u32 = 5,
});

section!(GridCfg {
    pitch: f64 = 48.0,
    thickness: f64 = 3.0,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaCfg {
    /// RNG seed for the segment detector's sampling order.
    pub seed: u64,
    pub ppht: PphtCfg,
    pub grid: GridCfg,
}

impl Default for SaCfg {
    fn default() -> Self {
        Self {
            seed: 7,
            ppht: PphtCfg::default(),
            grid: GridCfg::default(),
        }
    }
}

section!(SvmCfg {
    c: f64 = 1.0,
    epochs: u32 = 200,
    seed: u64 = 42,
});

section!(ProtocolCfg {
    /// Per-step reply deadline in seconds.
    timeout_s: f64 = 10.0,
    max_frame_mib: u32 = 32,
});

/// Every tunable parameter of the system. Sections mirror the pipeline
/// stages; see each section type for the knobs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub crop: CropCfg,
    pub canny: CannyCfg,
    pub threshold: ThresholdCfg,
    pub morph: MorphCfg,
    pub hough: HoughCfg,
    pub roi: RoiCfg,
    pub paa: PaaCfg,
    pub sa: SaCfg,
    pub svm: SvmCfg,
    pub protocol: ProtocolCfg,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies a dotted-key override like `hough.min_score=0.3`. The value
    /// is parsed as TOML, so strings need quotes only when ambiguous.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        let key = key.trim();
        let value = value.trim();
        // Unquoted non-numeric scalars are treated as strings.
        let fragment = format!("{key} = {value}");
        let patch: toml::Table = match toml::from_str(&fragment) {
            Ok(t) => t,
            Err(_) => toml::from_str(&format!("{key} = \"{value}\""))?,
        };
        let mut table: toml::Table = toml::from_str(&toml::to_string(self)?)?;
        merge_tables(&mut table, patch);
        *self = toml::Table::try_into(table)?;
        Ok(())
    }

    /// FNV-1a hash of the canonical serialization; stamped into measurement
    /// records.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config always serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    /// Flat view consumed by frame preprocessing.
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            crop_side: self.crop.side,
            hough_r_min_frac: self.hough.r_min_frac,
            hough_r_max_frac: self.hough.r_max_frac,
            hough_min_score: self.hough.min_score,
            canny_sigma: self.canny.sigma,
            canny_low: self.canny.low,
            canny_high: self.canny.high,
            roi_shrink: self.roi.shrink,
        }
    }
}

/// Parameters for locating and masking the solution circle, decoupled from
/// the full config for the callers that only preprocess.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub crop_side: u32,
    pub hough_r_min_frac: f64,
    pub hough_r_max_frac: f64,
    pub hough_min_score: f64,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub roi_shrink: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PipelineConfig::default().preprocess()
    }
}

fn merge_tables(base: &mut toml::Table, patch: toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(bt)), toml::Value::Table(pt)) => merge_tables(bt, pt),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
