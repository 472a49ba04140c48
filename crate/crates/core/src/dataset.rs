//! Labels, dataset records, flip augmentation and the CSV manifest format.
//!
//! Augmentation is stored as a tag on the record; pixels are flipped when
//! the images are loaded. A 153-case capture set therefore stays 306 files
//! on disk while training sees 612 cases / 1224 images.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::features::FeatureVector;
use crate::raster::{flip_h, flip_hv, flip_v, Raster, RasterError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown label `{0}`")]
    BadLabel(String),
    #[error("unknown scenario `{0}`")]
    BadScenario(String),
    #[error("unknown augmentation `{0}`")]
    BadAugmentation(String),
    #[error("manifest row {0}: expected 6 columns")]
    BadRow(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Dissolution verdict. The declaration order doubles as the classifier's
/// deterministic tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Label {
    /// Completely dissolved, transparent solution.
    Pass,
    /// Solution turned cloudy.
    Fail1,
    /// Solute remains as particles.
    Fail2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Pass, Label::Fail1, Label::Fail2];

    pub fn index(self) -> usize {
        match self {
            Label::Pass => 0,
            Label::Fail1 => 1,
            Label::Fail2 => 2,
        }
    }

    pub fn from_index(i: usize) -> Label {
        Self::ALL[i]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Pass => "Pass",
            Label::Fail1 => "Fail1",
            Label::Fail2 => "Fail2",
        };
        f.write_str(s)
    }
}

impl FromStr for Label {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Pass" => Ok(Label::Pass),
            "Fail1" => Ok(Label::Fail1),
            "Fail2" => Ok(Label::Fail2),
            other => Err(DatasetError::BadLabel(other.to_string())),
        }
    }
}

/// Scene category the case was generated from (dissolution case study
/// taxonomy): A clear, B saturated with particles, C undissolved with wall
/// residue, D turbid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
    D,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
            Scenario::D => "D",
        })
    }
}

impl FromStr for Scenario {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Scenario::A),
            "B" => Ok(Scenario::B),
            "C" => Ok(Scenario::C),
            "D" => Ok(Scenario::D),
            other => Err(DatasetError::BadScenario(other.to_string())),
        }
    }
}

/// Flip applied to both images of a case when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Augmentation {
    Identity,
    H,
    V,
    Hv,
}

impl Augmentation {
    pub const ALL: [Augmentation; 4] = [
        Augmentation::Identity,
        Augmentation::H,
        Augmentation::V,
        Augmentation::Hv,
    ];

    pub fn apply(self, img: &Raster) -> Raster {
        match self {
            Augmentation::Identity => img.clone(),
            Augmentation::H => flip_h(img),
            Augmentation::V => flip_v(img),
            Augmentation::Hv => flip_hv(img),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Augmentation::Identity => "",
            Augmentation::H => "_h",
            Augmentation::V => "_v",
            Augmentation::Hv => "_hv",
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Augmentation::Identity => "identity",
            Augmentation::H => "h",
            Augmentation::V => "v",
            Augmentation::Hv => "hv",
        })
    }
}

impl FromStr for Augmentation {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Augmentation::Identity),
            "h" => Ok(Augmentation::H),
            "v" => Ok(Augmentation::V),
            "hv" => Ok(Augmentation::Hv),
            other => Err(DatasetError::BadAugmentation(other.to_string())),
        }
    }
}

/// One manifest row: a labeled white/check image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: String,
    pub white_png: PathBuf,
    pub check_png: PathBuf,
    pub label: Label,
    pub scenario: Option<Scenario>,
    pub augmentation: Augmentation,
}

impl CaseRecord {
    /// Identity of the underlying capture, shared by all flip variants.
    /// Splits key on this to keep augmented copies in the same fold.
    pub fn source_id(&self) -> &str {
        let id = self.case_id.as_str();
        for tag in ["_hv", "_h", "_v"] {
            if let Some(stripped) = id.strip_suffix(tag) {
                return stripped;
            }
        }
        id
    }

    /// Loads the image pair with this record's flip applied.
    pub fn load_images(&self, base: &Path) -> Result<(Raster, Raster), DatasetError> {
        let white = Raster::load_png(&base.join(&self.white_png))?;
        let check = Raster::load_png(&base.join(&self.check_png))?;
        Ok((
            self.augmentation.apply(&white),
            self.augmentation.apply(&check),
        ))
    }
}

/// Quadruples the dataset: every case yields identity, horizontal,
/// vertical, and both-axis flip variants with the label preserved.
pub fn augment(cases: &[CaseRecord]) -> Vec<CaseRecord> {
    let mut out = Vec::with_capacity(cases.len() * 4);
    for case in cases {
        for aug in Augmentation::ALL {
            let mut v = case.clone();
            v.augmentation = aug;
            v.case_id = format!("{}{}", case.case_id, aug.suffix());
            out.push(v);
        }
    }
    out
}

/// Number of images the case list stands for (two per case).
pub fn image_count(cases: &[CaseRecord]) -> usize {
    cases.len() * 2
}

/// Per-label case histogram, indexed by [`Label::index`].
pub fn label_histogram(cases: &[CaseRecord]) -> [usize; 3] {
    let mut hist = [0usize; 3];
    for c in cases {
        hist[c.label.index()] += 1;
    }
    hist
}

const MANIFEST_HEADER: [&str; 6] = [
    "case_id",
    "white_png",
    "check_png",
    "label",
    "scenario",
    "augmentation",
];

/// Writes the manifest CSV next to the dataset images.
pub fn write_manifest(cases: &[CaseRecord], path: &Path) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(MANIFEST_HEADER)?;
    for c in cases {
        wtr.write_record([
            c.case_id.as_str(),
            &c.white_png.display().to_string(),
            &c.check_png.display().to_string(),
            &c.label.to_string(),
            &c.scenario.map(|s| s.to_string()).unwrap_or_default(),
            &c.augmentation.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a manifest CSV.
pub fn read_manifest(path: &Path) -> Result<Vec<CaseRecord>, DatasetError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() != 6 {
            return Err(DatasetError::BadRow(i + 1));
        }
        let scenario = if row[4].is_empty() {
            None
        } else {
            Some(row[4].parse()?)
        };
        out.push(CaseRecord {
            case_id: row[0].to_string(),
            white_png: PathBuf::from(&row[1]),
            check_png: PathBuf::from(&row[2]),
            label: row[3].parse()?,
            scenario,
            augmentation: row[5].parse()?,
        });
    }
    Ok(out)
}

/// Writes the feature dump CSV: the five feature columns plus the label.
pub fn write_feature_csv(
    rows: &[(FeatureVector, Label)],
    path: &Path,
) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = FeatureVector::NAMES.to_vec();
    header.push("label");
    wtr.write_record(&header)?;
    for (f, label) in rows {
        let a = f.as_array();
        wtr.write_record([
            a[0].to_string(),
            a[1].to_string(),
            a[2].to_string(),
            a[3].to_string(),
            a[4].to_string(),
            label.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
