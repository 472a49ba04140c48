//! Linear one-vs-rest SVM over the five features, trained by deterministic
//! subgradient descent on the L2-regularized hinge loss.
//!
//! Features are standardized with training-set statistics stored in the
//! model. Training is reproducible bit-for-bit for a fixed seed; models
//! serialize to a versioned text format that round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SvmCfg;
use crate::dataset::Label;
use crate::features::FeatureVector;

const DIM: usize = FeatureVector::DIM;
const N_CLASSES: usize = 3;
const MODEL_TAG: &str = "soluscan-svm v1";

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set is degenerate: {0}")]
    DegenerateTrainingSet(String),
    #[error("feature vector contains non-finite values")]
    BadFeature,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmHyper {
    /// Inverse regularization strength of the C-SVM objective.
    pub c: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for SvmHyper {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 200,
            seed: 42,
        }
    }
}

impl From<&SvmCfg> for SvmHyper {
    fn from(cfg: &SvmCfg) -> Self {
        Self {
            c: cfg.c,
            epochs: cfg.epochs,
            seed: cfg.seed,
        }
    }
}

/// Per-feature z-score parameters frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: [f64; DIM],
    pub scale: [f64; DIM],
}

impl Standardizer {
    fn fit(data: &[[f64; DIM]]) -> Self {
        let n = data.len() as f64;
        let mut mean = [0.0; DIM];
        for x in data {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0; DIM];
        for x in data {
            for d in 0..DIM {
                var[d] += (x[d] - mean[d]).powi(2);
            }
        }
        let mut scale = [0.0; DIM];
        for d in 0..DIM {
            // Constant features get unit scale instead of a zero divisor.
            scale[d] = (var[d] / n).sqrt().max(1e-12);
        }
        Self { mean, scale }
    }

    pub fn normalize(&self, x: &[f64; DIM]) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for d in 0..DIM {
            out[d] = (x[d] - self.mean[d]) / self.scale[d];
        }
        out
    }

    pub fn denormalize(&self, z: &[f64; DIM]) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for d in 0..DIM {
            out[d] = z[d] * self.scale[d] + self.mean[d];
        }
        out
    }
}

/// Trained one-vs-rest model: a weight vector and bias per class, plus the
/// feature standardization and the hyperparameters it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub hyper: SvmHyper,
    pub standardizer: Standardizer,
    pub weights: [[f64; DIM]; N_CLASSES],
    pub biases: [f64; N_CLASSES],
}

impl SvmModel {
    /// Per-class decision values for a normalized input.
    pub fn decision_values(&self, f: &FeatureVector) -> Result<[f64; N_CLASSES], SvmError> {
        if !f.is_finite() {
            return Err(SvmError::BadFeature);
        }
        let z = self.standardizer.normalize(&f.as_array());
        let mut out = [0.0; N_CLASSES];
        for (o, (w, b)) in out.iter_mut().zip(self.weights.iter().zip(&self.biases)) {
            *o = dot(w, &z) + b;
        }
        Ok(out)
    }

    /// Argmax over the per-class scores; exact ties resolve to the earliest
    /// class in declaration order (Pass, Fail1, Fail2).
    pub fn classify(&self, f: &FeatureVector) -> Result<Label, SvmError> {
        let scores = self.decision_values(f)?;
        let mut best = 0usize;
        for k in 1..N_CLASSES {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        Ok(Label::from_index(best))
    }

    /// Serializes to the versioned text format. Floats are printed with
    /// Rust's shortest round-trip representation, so save/load is exact.
    pub fn to_model_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_TAG}");
        let _ = writeln!(s, "c = {}", self.hyper.c);
        let _ = writeln!(s, "epochs = {}", self.hyper.epochs);
        let _ = writeln!(s, "seed = {}", self.hyper.seed);
        let _ = writeln!(s, "means = {}", join_floats(&self.standardizer.mean));
        let _ = writeln!(s, "scales = {}", join_floats(&self.standardizer.scale));
        for k in 0..N_CLASSES {
            let _ = writeln!(s, "class = {}", Label::from_index(k));
            let _ = writeln!(s, "w = {}", join_floats(&self.weights[k]));
            let _ = writeln!(s, "b = {}", self.biases[k]);
        }
        s
    }

    pub fn from_model_text(text: &str) -> Result<Self, SvmError> {
        let mut lines = text.lines();
        let tag = lines.next().unwrap_or_default();
        if tag.trim() != MODEL_TAG {
            return Err(SvmError::ModelFormat(format!("unknown format `{tag}`")));
        }
        let mut take = |key: &str| -> Result<String, SvmError> {
            let line = lines
                .next()
                .ok_or_else(|| SvmError::ModelFormat(format!("missing `{key}`")))?;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SvmError::ModelFormat(format!("bad line `{line}`")))?;
            if k.trim() != key {
                return Err(SvmError::ModelFormat(format!(
                    "expected `{key}`, found `{}`",
                    k.trim()
                )));
            }
            Ok(v.trim().to_string())
        };
        let c = parse_f64(&take("c")?)?;
        let epochs = take("epochs")?
            .parse::<u32>()
            .map_err(|e| SvmError::ModelFormat(e.to_string()))?;
        let seed = take("seed")?
            .parse::<u64>()
            .map_err(|e| SvmError::ModelFormat(e.to_string()))?;
        let mean = parse_floats(&take("means")?)?;
        let scale = parse_floats(&take("scales")?)?;
        let mut weights = [[0.0; DIM]; N_CLASSES];
        let mut biases = [0.0; N_CLASSES];
        for k in 0..N_CLASSES {
            let class = take("class")?;
            if class != Label::from_index(k).to_string() {
                return Err(SvmError::ModelFormat(format!(
                    "class order mismatch: `{class}`"
                )));
            }
            weights[k] = parse_floats(&take("w")?)?;
            biases[k] = parse_f64(&take("b")?)?;
        }
        Ok(Self {
            hyper: SvmHyper { c, epochs, seed },
            standardizer: Standardizer { mean, scale },
            weights,
            biases,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SvmError> {
        std::fs::write(path, self.to_model_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SvmError> {
        Self::from_model_text(&std::fs::read_to_string(path)?)
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_f64(s: &str) -> Result<f64, SvmError> {
    s.parse::<f64>()
        .map_err(|e| SvmError::ModelFormat(format!("bad float `{s}`: {e}")))
}

fn parse_floats(s: &str) -> Result<[f64; DIM], SvmError> {
    let parts: Vec<f64> = s
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| SvmError::ModelFormat(format!("expected {DIM} floats in `{s}`")))
}

#[inline]
fn dot(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    let mut s = 0.0;
    for d in 0..DIM {
        s += a[d] * b[d];
    }
    s
}

/// L2-regularized hinge objective of one binary classifier:
/// `lambda/2 ||w||^2 + mean(hinge)` over bias-augmented samples.
fn binary_objective(xs: &[[f64; DIM + 1]], ys: &[f64], w: &[f64; DIM + 1], lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y * dot_aug(w, x)).max(0.0))
        .sum::<f64>()
        / xs.len() as f64;
    0.5 * lambda * dot_aug(w, w) + hinge
}

#[inline]
fn dot_aug(a: &[f64; DIM + 1], b: &[f64; DIM + 1]) -> f64 {
    let mut s = 0.0;
    for d in 0..DIM + 1 {
        s += a[d] * b[d];
    }
    s
}

/// Trains the three one-vs-rest classifiers. Returns the model and the
/// summed regularized objective after every epoch (for convergence checks).
pub fn train_svm_with_trace(
    data: &[(FeatureVector, Label)],
    hyper: &SvmHyper,
) -> Result<(SvmModel, Vec<f64>), SvmError> {
    if data.len() < 6 {
        return Err(SvmError::DegenerateTrainingSet(format!(
            "{} samples, need at least 6",
            data.len()
        )));
    }
    if data.iter().any(|(f, _)| !f.is_finite()) {
        return Err(SvmError::BadFeature);
    }
    let mut seen = [false; N_CLASSES];
    for (_, label) in data {
        seen[label.index()] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(SvmError::DegenerateTrainingSet(
            "fewer than two distinct labels".into(),
        ));
    }

    let raw: Vec<[f64; DIM]> = data.iter().map(|(f, _)| f.as_array()).collect();
    let standardizer = Standardizer::fit(&raw);
    // Bias handled as an always-1 augmented coordinate, so the plain
    // Pegasos step applies to the whole parameter vector.
    let xs: Vec<[f64; DIM + 1]> = raw
        .iter()
        .map(|x| {
            let z = standardizer.normalize(x);
            let mut aug = [1.0; DIM + 1];
            aug[..DIM].copy_from_slice(&z);
            aug
        })
        .collect();
    let n = xs.len();
    let lambda = 1.0 / (hyper.c * n as f64);

    let mut weights = [[0.0; DIM]; N_CLASSES];
    let mut biases = [0.0; N_CLASSES];
    let mut trace = vec![0.0f64; hyper.epochs as usize];

    for k in 0..N_CLASSES {
        let ys: Vec<f64> = data
            .iter()
            .map(|(_, l)| if l.index() == k { 1.0 } else { -1.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(k as u64));
        let mut order: Vec<usize> = (0..n).collect();
        let mut w = [0.0f64; DIM + 1];
        let mut t = 1u64;
        for epoch_objective in trace.iter_mut() {
            order.shuffle(&mut rng);
            for &i in &order {
                let eta = 1.0 / (lambda * t as f64);
                let margin = ys[i] * dot_aug(&w, &xs[i]);
                let shrink = 1.0 - eta * lambda;
                for wd in &mut w {
                    *wd *= shrink;
                }
                if margin < 1.0 {
                    let g = eta * ys[i];
                    for (wd, xd) in w.iter_mut().zip(&xs[i]) {
                        *wd += g * xd;
                    }
                }
                t += 1;
            }
            *epoch_objective += binary_objective(&xs, &ys, &w, lambda);
        }
        weights[k].copy_from_slice(&w[..DIM]);
        biases[k] = w[DIM];
    }

    Ok((
        SvmModel {
            hyper: hyper.clone(),
            standardizer,
            weights,
            biases,
        },
        trace,
    ))
}

/// Trains the three one-vs-rest classifiers.
pub fn train_svm(data: &[(FeatureVector, Label)], hyper: &SvmHyper) -> Result<SvmModel, SvmError> {
    train_svm_with_trace(data, hyper).map(|(m, _)| m)
}
