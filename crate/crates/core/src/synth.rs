//! Parametric flask-scene renderer: the test oracle that stands in for the
//! laboratory hardware. Renders white- and check-background frames for
//! controllable dissolution states and emits labeled datasets.
//!
//! Turbidity model: the solution hides the background behind a patchy
//! cloud. A smooth pseudo-random field is thresholded at an area quantile
//! that grows with the turbidity parameter, so cloud regions at a lower
//! turbidity are strict subsets of those at a higher one and the visible
//! grid area shrinks monotonically — the behavior the grid-overlap
//! feature measures. Undissolved solids sit in front of the cloud.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::{write_manifest, CaseRecord, DatasetError, Label, Scenario};
use crate::raster::Raster;
use crate::roi::Circle;
use crate::sa::{self, GroundTruthPattern};

const WHITE_BG: f64 = 235.0;
const GRID_INT: f64 = 45.0;
const WALL_INT: f64 = 60.0;
/// Milky-bright cloud gray: close enough to the white backlight that cloud
/// rims stay out of the particle threshold, far enough to read as haze.
const HAZE: f64 = 227.0;
const DROPLET_INT: f64 = 120.0;
/// Cloud-coverage response: turbidity where half the disk is covered, and
/// the sigmoid width around it.
const CLOUD_CENTER: f64 = 0.32;
const CLOUD_WIDTH: f64 = 0.09;
/// Soft edge of the cloud boundary, in units of the modulation field.
const CLOUD_EDGE: f64 = 0.15;
/// Labeling rule: at or above this turbidity the scene is cloudy (Fail 1).
pub const FAIL1_TURBIDITY: f64 = 0.35;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad scene parameters: {0}")]
    BadSceneParams(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Where rendered particles settle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Scattered across the solution (saturated or floating material).
    Uniform,
    /// Sunk to the bottom and stuck to the inner wall.
    BottomWall,
}

/// Undissolved-solute field description.
#[derive(Debug, Clone)]
pub struct ParticleField {
    pub count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Gray level of the particle body.
    pub intensity: f64,
    pub placement: Placement,
}

impl ParticleField {
    pub fn none() -> Self {
        Self {
            count: 0,
            radius_min: 2.0,
            radius_max: 5.0,
            intensity: 30.0,
            placement: Placement::Uniform,
        }
    }
}

/// Which background the display shows for a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    White,
    Check,
}

/// Full description of one rendered scene. Deterministic: the same params
/// always produce bit-identical frames.
#[derive(Debug, Clone)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub circle: Circle,
    /// Fraction of background contrast destroyed by cloudiness, 0..=1.
    pub turbidity: f64,
    pub particles: ParticleField,
    /// Illumination falloff toward the rim, 0..=1.
    pub vignette: f64,
    pub noise_sigma: f64,
    pub grid_pitch: f64,
    pub grid_thickness: f64,
    /// Category-C droplets on the inner wall.
    pub wall_artifacts: bool,
    /// Drives particle placement and the turbidity modulation field.
    pub seed: u64,
    /// Drives sensor noise only; series vary it per step while keeping the
    /// scene state fixed.
    pub noise_seed: u64,
}

impl SceneParams {
    /// Clear solution centered in the frame.
    pub fn clear(width: u32, height: u32, radius: f64, seed: u64) -> Self {
        Self {
            width,
            height,
            circle: Circle::new((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0, radius),
            turbidity: 0.0,
            particles: ParticleField::none(),
            vignette: 0.08,
            noise_sigma: 2.0,
            grid_pitch: 48.0,
            grid_thickness: 3.0,
            wall_artifacts: false,
            seed,
            noise_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::BadSceneParams(msg));
        if self.width == 0 || self.height == 0 {
            return fail("empty frame".into());
        }
        if !(0.0..=1.0).contains(&self.turbidity) {
            return fail(format!("turbidity {} outside [0,1]", self.turbidity));
        }
        if !(0.0..=1.0).contains(&self.vignette) {
            return fail(format!("vignette {} outside [0,1]", self.vignette));
        }
        if self.circle.r < 8.0 {
            return fail(format!("circle radius {} too small", self.circle.r));
        }
        if !self.circle.fits_in(self.width, self.height) {
            return fail("circle does not fit in the frame".into());
        }
        if self.particles.radius_min < 1.0 || self.particles.radius_max < self.particles.radius_min
        {
            return fail("bad particle radius range".into());
        }
        if self.grid_pitch <= self.grid_thickness || self.grid_thickness < 1.0 {
            return fail("bad grid geometry".into());
        }
        if self.noise_sigma < 0.0 {
            return fail("negative noise sigma".into());
        }
        Ok(())
    }
}

/// Ground-truth labeling rule of the renderer: cloudiness wins, then
/// particles, otherwise the solution is clear.
pub fn truth_label(p: &SceneParams) -> Label {
    if p.turbidity >= FAIL1_TURBIDITY {
        Label::Fail1
    } else if p.particles.count > 0 {
        Label::Fail2
    } else {
        Label::Pass
    }
}

struct Blob {
    x: f64,
    y: f64,
    radius: f64,
    intensity: f64,
}

/// Particle positions come from a single seeded stream with a fixed number
/// of draws per particle, so a larger count extends the smaller set
/// without moving existing particles.
fn particle_list(p: &SceneParams) -> Vec<Blob> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let c = &p.circle;
    let mut blobs = Vec::with_capacity(p.particles.count);
    for _ in 0..p.particles.count {
        let mode_roll: f64 = rng.random_range(0.0..1.0);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let rad_roll: f64 = rng.random_range(0.0..1.0);
        let radius = rng.random_range(p.particles.radius_min..=p.particles.radius_max);
        let wobble: f64 = rng.random_range(-0.4..0.4);
        let (theta, rad_frac) = match p.particles.placement {
            Placement::Uniform => (angle, 0.92 * rad_roll.sqrt()),
            Placement::BottomWall => {
                if mode_roll < 0.6 {
                    // settled at the bottom
                    (std::f64::consts::FRAC_PI_2 + wobble, 0.72 + 0.20 * rad_roll)
                } else {
                    // stuck to the wall, bottom-weighted
                    (
                        std::f64::consts::FRAC_PI_2 + wobble * 3.5,
                        0.86 + 0.07 * rad_roll,
                    )
                }
            }
        };
        blobs.push(Blob {
            x: c.cx + rad_frac * c.r * theta.cos(),
            y: c.cy + rad_frac * c.r * theta.sin(),
            radius,
            intensity: p.particles.intensity,
        });
    }
    if p.wall_artifacts {
        // Water droplets on the inner wall; a fixed sub-stream keeps them
        // stable as particle counts change.
        let mut drng = ChaCha8Rng::seed_from_u64(p.seed ^ 0xd0_0d1e5);
        for _ in 0..18 {
            let angle: f64 = drng.random_range(0.0..std::f64::consts::TAU);
            let radius: f64 = drng.random_range(1.5..3.5);
            let rad_frac: f64 = drng.random_range(0.90..0.95);
            blobs.push(Blob {
                x: c.cx + rad_frac * c.r * angle.cos(),
                y: c.cy + rad_frac * c.r * angle.sin(),
                radius,
                intensity: DROPLET_INT,
            });
        }
    }
    blobs
}

/// Smooth modulation field in [-1, 1]: three seeded sine waves with
/// wavelengths proportional to the flask radius.
struct Modulation {
    cx: f64,
    cy: f64,
    k: [(f64, f64, f64); 3],
}

impl Modulation {
    fn new(p: &SceneParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x7a7c_41e5);
        let mut k = [(0.0, 0.0, 0.0); 3];
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        let dirs: [(f64, f64); 3] = [(1.0, 0.0), (0.0, 1.0), (diag, diag)];
        for (i, (dx, dy)) in dirs.into_iter().enumerate() {
            let wavelength = p.circle.r * rng.random_range(0.5..0.9);
            let omega = std::f64::consts::TAU / wavelength;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            k[i] = (omega * dx, omega * dy, phase);
        }
        Self {
            cx: p.circle.cx,
            cy: p.circle.cy,
            k,
        }
    }

    #[inline]
    fn at(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let mut s = 0.0;
        for (kx, ky, phase) in self.k {
            s += (kx * dx + ky * dy + phase).sin();
        }
        s / 3.0
    }
}

/// Fraction of the disk the cloud covers at a given turbidity: a sigmoid
/// in tau, rescaled so coverage is exactly 0 at tau = 0 and 1 at tau = 1.
fn cloud_coverage(tau: f64) -> f64 {
    let raw = |t: f64| 1.0 / (1.0 + (-(t - CLOUD_CENTER) / CLOUD_WIDTH).exp());
    let lo = raw(0.0);
    let hi = raw(1.0);
    ((raw(tau) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Modulation-field threshold whose sublevel set covers `coverage` of the
/// disk, from an empirical quantile over a pixel subsample.
fn cloud_threshold(p: &SceneParams, modulation: &Modulation, coverage: f64) -> f64 {
    if coverage <= 0.0 {
        return -2.0; // below the field's range: no cloud anywhere
    }
    if coverage >= 1.0 {
        return 2.0; // above the range: cloud everywhere
    }
    let c = &p.circle;
    let mut samples = Vec::new();
    let step = 3u32;
    let x0 = (c.cx - c.r).max(0.0) as u32;
    let x1 = ((c.cx + c.r) as u32).min(p.width - 1);
    let y0 = (c.cy - c.r).max(0.0) as u32;
    let y1 = ((c.cy + c.r) as u32).min(p.height - 1);
    let mut y = y0;
    while y <= y1 {
        let mut x = x0;
        while x <= x1 {
            if c.dist(x as f64, y as f64) <= c.r {
                samples.push(modulation.at(x as f64, y as f64));
            }
            x += step;
        }
        y += step;
    }
    samples.sort_by(f64::total_cmp);
    let idx = ((samples.len() as f64 - 1.0) * coverage).round() as usize;
    samples[idx.min(samples.len() - 1)]
}

/// Renders one frame of the scene under the given background.
pub fn render_frame(p: &SceneParams, bg: Background) -> Result<Raster, SynthError> {
    p.validate()?;
    let w = p.width as usize;
    let h = p.height as usize;
    let c = &p.circle;

    // Background as seen directly (outside the flask silhouette).
    let mut field = vec![0.0f64; w * h];
    for y in 0..h {
        let dy = y as f64 - c.cy;
        for x in 0..w {
            let v = match bg {
                Background::White => WHITE_BG,
                Background::Check => {
                    let dx = x as f64 - c.cx;
                    if sa::on_grid(dx, dy, p.grid_pitch, p.grid_thickness) {
                        GRID_INT
                    } else {
                        WHITE_BG
                    }
                }
            };
            field[y * w + x] = v;
        }
    }

    // Solution layer: the cloud hides the background toward the haze gray
    // inside its (soft-edged) region, and the vignette dims the disk.
    let tau = p.turbidity;
    let coverage = cloud_coverage(tau);
    let cloud = if coverage > 0.0 {
        let modulation = Modulation::new(p);
        let q = cloud_threshold(p, &modulation, coverage);
        Some((modulation, q))
    } else {
        None
    };
    for y in 0..h {
        let dy = y as f64 - c.cy;
        for x in 0..w {
            let dx = x as f64 - c.cx;
            let d = (dx * dx + dy * dy).sqrt();
            let disk_alpha = (c.r + 0.5 - d).clamp(0.0, 1.0);
            if disk_alpha <= 0.0 {
                continue;
            }
            let i = y * w + x;
            let mut inside = field[i];
            if let Some((modulation, q)) = &cloud {
                let m = modulation.at(x as f64, y as f64);
                // 1 deep inside the cloud, 0 outside, smooth across the rim.
                let s = smoothstep((q - m) / CLOUD_EDGE + 0.5);
                inside = (1.0 - s) * inside + s * HAZE;
            }
            if p.vignette > 0.0 {
                inside *= 1.0 - p.vignette * (d / c.r).powi(2);
            }
            field[i] = field[i] * (1.0 - disk_alpha) + inside * disk_alpha;
        }
    }

    // Solids sit in front of the solution; they stay visible over the
    // cloud, which keeps particle counts tied to the rendered count.
    for blob in particle_list(p) {
        let x0 = ((blob.x - blob.radius - 1.0).floor().max(0.0)) as usize;
        let x1 = ((blob.x + blob.radius + 1.0).ceil().min((w - 1) as f64)) as usize;
        let y0 = ((blob.y - blob.radius - 1.0).floor().max(0.0)) as usize;
        let y1 = ((blob.y + blob.radius + 1.0).ceil().min((h - 1) as f64)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - blob.x).powi(2) + (y as f64 - blob.y).powi(2)).sqrt();
                let alpha = (blob.radius + 0.5 - d).clamp(0.0, 1.0);
                if alpha > 0.0 {
                    let i = y * w + x;
                    field[i] = field[i] * (1.0 - alpha) + blob.intensity * alpha;
                }
            }
        }
    }

    // Glass wall ring; outside the solution, never attenuated.
    for y in 0..h {
        let dy = y as f64 - c.cy;
        for x in 0..w {
            let dx = x as f64 - c.cx;
            let d = (dx * dx + dy * dy).sqrt();
            let band = (2.0 - (d - c.r).abs()).clamp(0.0, 1.0);
            if band > 0.0 {
                let i = y * w + x;
                field[i] = field[i] * (1.0 - band) + WALL_INT * band;
            }
        }
    }

    // Sensor noise, equal across channels.
    let mut data = Vec::with_capacity(w * h * 3);
    if p.noise_sigma > 0.0 {
        let salt = match bg {
            Background::White => 1u64,
            Background::Check => 2u64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed ^ (salt << 32));
        let normal = Normal::new(0.0, p.noise_sigma).expect("sigma validated");
        for v in &mut field {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &field {
        let q = v.round().clamp(0.0, 255.0) as u8;
        data.extend_from_slice(&[q, q, q]);
    }
    Ok(Raster::from_vec(p.width, p.height, 3, data).expect("sized buffer"))
}

/// A rendered measurement pair plus its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub white: Raster,
    pub check: Raster,
    pub truth: Label,
    /// Analytic grid of the check background in frame coordinates,
    /// restricted to the flask circle.
    pub grid: GroundTruthPattern,
}

/// Renders the white and check frames of a scene.
pub fn render_scene(p: &SceneParams) -> Result<RenderedScene, SynthError> {
    let white = render_frame(p, Background::White)?;
    let check = render_frame(p, Background::Check)?;
    let grid = sa::analytic_grid(
        p.width,
        p.height,
        &p.circle,
        p.grid_pitch,
        p.grid_thickness,
    );
    Ok(RenderedScene {
        white,
        check,
        truth: truth_label(p),
        grid,
    })
}

/// Frame geometry for generated scenes.
#[derive(Debug, Clone, Copy)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    /// Side of the center crop the pipeline will apply; circle sizes are
    /// chosen relative to it.
    pub crop_side: u32,
}

impl Default for FrameGeometry {
    fn default() -> Self {
        Self {
            width: 1920,
            height: 1440,
            crop_side: 900,
        }
    }
}

/// Deterministic scene for one of the four dissolution categories, circle
/// centered in the frame.
pub fn category_preset(cat: Scenario, seed: u64) -> SceneParams {
    category_preset_sized(cat, seed, FrameGeometry::default())
}

/// [`category_preset`] for a custom frame geometry.
pub fn category_preset_sized(cat: Scenario, seed: u64, geom: FrameGeometry) -> SceneParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(cat as u64));
    let side = geom.crop_side as f64;
    let mut p = SceneParams::clear(
        geom.width,
        geom.height,
        side * rng.random_range(0.38..0.44),
        seed,
    );
    p.vignette = rng.random_range(0.03..0.15);
    p.noise_sigma = rng.random_range(1.2..2.4);
    match cat {
        Scenario::A => {
            p.turbidity = rng.random_range(0.0..0.03);
        }
        Scenario::B => {
            p.turbidity = rng.random_range(0.03..0.18);
            p.particles = ParticleField {
                count: rng.random_range(25..140),
                radius_min: 2.0,
                radius_max: 5.0,
                intensity: 30.0,
                placement: Placement::Uniform,
            };
        }
        Scenario::C => {
            p.turbidity = rng.random_range(0.0..0.10);
            p.particles = ParticleField {
                count: rng.random_range(50..160),
                radius_min: 2.0,
                radius_max: 6.0,
                intensity: 30.0,
                placement: Placement::BottomWall,
            };
            p.wall_artifacts = true;
        }
        Scenario::D => {
            p.turbidity = rng.random_range(0.45..0.78);
            p.particles = ParticleField {
                count: rng.random_range(4..24),
                radius_min: 3.0,
                radius_max: 7.0,
                intensity: 30.0,
                placement: Placement::Uniform,
            };
        }
    }
    p
}

/// Interpolation shape for dissolution over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Linear,
    Exponential,
}

impl Schedule {
    /// Remaining fraction at step i of n (1 at the start, 0 at the end).
    fn remaining(&self, i: usize, n: usize) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        let x = i as f64 / (n - 1) as f64;
        match self {
            Schedule::Linear => 1.0 - x,
            Schedule::Exponential => {
                let k = 5.0;
                ((-k * x).exp() - (-k).exp()) / (1.0 - (-k).exp())
            }
        }
    }
}

/// A dissolving sample over time: turbidity and particle count fade to
/// zero. The scene seed stays fixed (same flask), only sensor noise varies
/// per step.
#[derive(Debug, Clone)]
pub struct DissolutionSeries {
    pub steps: Vec<SceneParams>,
    pub timestamps_min: Vec<f64>,
}

impl DissolutionSeries {
    pub fn labels(&self) -> Vec<Label> {
        self.steps.iter().map(truth_label).collect()
    }
}

/// Builds an n-step series from the starting scene down to full
/// dissolution, sampled every `interval_min` minutes.
pub fn dissolution_series(
    start: &SceneParams,
    steps: usize,
    schedule: Schedule,
    interval_min: f64,
) -> DissolutionSeries {
    assert!(steps >= 2, "a series needs at least two steps");
    let mut out = Vec::with_capacity(steps);
    let mut timestamps = Vec::with_capacity(steps);
    for i in 0..steps {
        let remaining = schedule.remaining(i, steps);
        let mut p = start.clone();
        p.turbidity = start.turbidity * remaining;
        p.particles.count = (start.particles.count as f64 * remaining).round() as usize;
        p.noise_seed = start.seed ^ ((i as u64 + 1) << 16);
        out.push(p);
        timestamps.push(i as f64 * interval_min);
    }
    DissolutionSeries {
        steps: out,
        timestamps_min: timestamps,
    }
}

/// Label mix and geometry for a generated dataset.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub pass: usize,
    pub fail1: usize,
    pub fail2: usize,
    pub seed: u64,
    pub geometry: FrameGeometry,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        // The captured-dataset mix: 29 Pass, 20 Fail 1, 104 Fail 2.
        Self {
            pass: 29,
            fail1: 20,
            fail2: 104,
            seed: 42,
            geometry: FrameGeometry::default(),
        }
    }
}

/// Scene parameters for every case of the dataset, with per-case jitter.
/// Pass cases draw from category A, Fail 1 from D, Fail 2 from B with
/// every fourth case a C.
pub fn dataset_scene_params(spec: &DatasetSpec) -> Vec<(SceneParams, Label, Scenario)> {
    let mut out = Vec::with_capacity(spec.pass + spec.fail1 + spec.fail2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut push = |cat: Scenario, rng: &mut ChaCha8Rng| {
        let case_seed: u64 = rng.random();
        let mut p = category_preset_sized(cat, case_seed, spec.geometry);
        // Off-center jitter, bounded so the circle stays inside the crop.
        let slack = 0.02 * spec.geometry.crop_side as f64;
        p.circle.cx += rng.random_range(-slack..slack);
        p.circle.cy += rng.random_range(-slack..slack);
        out.push((p, truth_label_of(cat), cat));
    };
    for _ in 0..spec.pass {
        push(Scenario::A, &mut rng);
    }
    for _ in 0..spec.fail1 {
        push(Scenario::D, &mut rng);
    }
    for i in 0..spec.fail2 {
        let cat = if i % 4 == 3 { Scenario::C } else { Scenario::B };
        push(cat, &mut rng);
    }
    out
}

#[inline]
fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn truth_label_of(cat: Scenario) -> Label {
    match cat {
        Scenario::A => Label::Pass,
        Scenario::B | Scenario::C => Label::Fail2,
        Scenario::D => Label::Fail1,
    }
}

/// Renders the dataset to `out_dir` (PNG pairs plus `manifest.csv`) and
/// returns the unaugmented records.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Vec<CaseRecord>, SynthError> {
    std::fs::create_dir_all(out_dir)?;
    let scenes = dataset_scene_params(spec);
    let mut records = Vec::with_capacity(scenes.len());
    for (i, (params, label, scenario)) in scenes.iter().enumerate() {
        let case_id = format!("case{i:04}");
        let rendered = render_scene(params)?;
        let white_png = format!("{case_id}_white.png");
        let check_png = format!("{case_id}_check.png");
        rendered.white.save_png(&out_dir.join(&white_png))?;
        rendered.check.save_png(&out_dir.join(&check_png))?;
        debug_assert_eq!(*label, rendered.truth);
        records.push(CaseRecord {
            case_id,
            white_png: white_png.into(),
            check_png: check_png.into(),
            label: *label,
            scenario: Some(*scenario),
            augmentation: crate::dataset::Augmentation::Identity,
        });
    }
    write_manifest(&records, &out_dir.join("manifest.csv"))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::to_grayscale;

    fn small_geom() -> FrameGeometry {
        FrameGeometry {
            width: 560,
            height: 560,
            crop_side: 480,
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let p = category_preset_sized(Scenario::B, 7, small_geom());
        let a = render_scene(&p).unwrap();
        let b = render_scene(&p).unwrap();
        assert_eq!(a.white, b.white);
        assert_eq!(a.check, b.check);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn labels_follow_the_rule() {
        let mut p = SceneParams::clear(560, 560, 200.0, 1);
        assert_eq!(truth_label(&p), Label::Pass);
        p.particles.count = 10;
        assert_eq!(truth_label(&p), Label::Fail2);
        p.turbidity = 0.5;
        assert_eq!(truth_label(&p), Label::Fail1);
        p.turbidity = FAIL1_TURBIDITY;
        assert_eq!(truth_label(&p), Label::Fail1);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = SceneParams::clear(560, 560, 200.0, 1);
        p.turbidity = 1.5;
        assert!(matches!(
            render_frame(&p, Background::White),
            Err(SynthError::BadSceneParams(_))
        ));
        let mut p = SceneParams::clear(560, 560, 200.0, 1);
        p.circle.cx = 100.0; // circle pokes out of the frame
        assert!(p.validate().is_err());
    }

    #[test]
    fn turbidity_kills_check_contrast() {
        // Mean absolute deviation inside the circle at tau=0.8 is at most
        // 20% of the clear scene's (noise off isolates the model).
        let mut p = SceneParams::clear(560, 560, 200.0, 3);
        p.noise_sigma = 0.0;
        p.vignette = 0.0;
        let clear = to_grayscale(&render_frame(&p, Background::Check).unwrap());
        p.turbidity = 0.8;
        let turbid = to_grayscale(&render_frame(&p, Background::Check).unwrap());
        let contrast = |img: &Raster| -> f64 {
            let c = Circle::new(279.5, 279.5, 190.0);
            let mut vals = Vec::new();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if c.dist(x as f64, y as f64) <= c.r {
                        vals.push(img.get(x, y, 0) as f64);
                    }
                }
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean).abs()).sum::<f64>() / vals.len() as f64
        };
        let c0 = contrast(&clear);
        let c8 = contrast(&turbid);
        assert!(c8 <= 0.2 * c0, "contrast {c8:.2} vs clear {c0:.2}");
    }

    #[test]
    fn particle_streams_are_nested() {
        let mut p = SceneParams::clear(560, 560, 200.0, 9);
        p.particles.count = 30;
        let small = particle_list(&p);
        p.particles.count = 90;
        let large = particle_list(&p);
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
            assert_eq!(a.radius, b.radius);
        }
    }

    #[test]
    fn series_fades_monotonically_to_clear() {
        let mut start = SceneParams::clear(560, 560, 200.0, 5);
        start.turbidity = 0.7;
        start.particles.count = 150;
        let series = dissolution_series(&start, 28, Schedule::Linear, 5.0);
        assert_eq!(series.steps.len(), 28);
        assert_eq!(series.timestamps_min[27], 135.0);
        let taus: Vec<f64> = series.steps.iter().map(|s| s.turbidity).collect();
        let counts: Vec<usize> = series.steps.iter().map(|s| s.particles.count).collect();
        assert!(taus.windows(2).all(|w| w[1] <= w[0]));
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        let labels = series.labels();
        assert_eq!(*labels.last().unwrap(), Label::Pass);
        assert_eq!(labels[0], Label::Fail1);
        assert_eq!(series.steps[27].turbidity, 0.0);
        assert_eq!(series.steps[27].particles.count, 0);
        // exponential schedule also ends clear
        let series = dissolution_series(&start, 10, Schedule::Exponential, 5.0);
        assert_eq!(series.steps[9].particles.count, 0);
        assert!(series.steps[9].turbidity.abs() < 1e-12);
    }

    #[test]
    fn dataset_mix_and_manifest() {
        let spec = DatasetSpec {
            pass: 3,
            fail1: 2,
            fail2: 4,
            seed: 11,
            geometry: FrameGeometry {
                width: 260,
                height: 260,
                crop_side: 220,
            },
        };
        let scenes = dataset_scene_params(&spec);
        assert_eq!(scenes.len(), 9);
        let hist = {
            let mut h = [0usize; 3];
            for (_, label, _) in &scenes {
                h[label.index()] += 1;
            }
            h
        };
        assert_eq!(hist, [3, 2, 4]);
        for (p, label, _) in &scenes {
            p.validate().unwrap();
            assert_eq!(truth_label(p), *label);
        }
        let dir = std::env::temp_dir().join("soluscan_synth_dataset_test");
        let _ = std::fs::remove_dir_all(&dir);
        let records = generate_dataset(&spec, &dir).unwrap();
        assert_eq!(records.len(), 9);
        let manifest = crate::dataset::read_manifest(&dir.join("manifest.csv")).unwrap();
        assert_eq!(manifest.len(), 9);
        assert!(dir.join("case0000_white.png").exists());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn generated_pngs_are_byte_identical_across_runs() {
        let p = category_preset_sized(Scenario::D, 21, small_geom());
        let a = render_frame(&p, Background::Check).unwrap().to_png_bytes().unwrap();
        let b = render_frame(&p, Background::Check).unwrap().to_png_bytes().unwrap();
        assert_eq!(a, b);
    }
}
