//! Evaluation machinery: confusion matrices and stratified k-fold
//! validation that keeps augmented variants of a capture in one fold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Label;
use crate::features::FeatureVector;
use crate::svm::{train_svm, SvmError, SvmHyper};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 folds, got {0}")]
    BadFoldCount(usize),
    #[error("fold {0} is empty; dataset too small for {1} folds")]
    EmptyFold(usize, usize),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// 3x3 confusion counts; rows are truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[Label], preds: &[Label]) -> Result<Self, EvalError> {
        if truth.len() != preds.len() {
            return Err(EvalError::LengthMismatch(preds.len(), truth.len()));
        }
        let mut counts = [[0usize; 3]; 3];
        for (t, p) in truth.iter().zip(preds) {
            counts[t.index()][p.index()] += 1;
        }
        Ok(Self { counts })
    }

    pub fn row_total(&self, label: Label) -> usize {
        self.counts[label.index()].iter().sum()
    }

    /// Diagonal over row total; `None` for labels absent from the truth.
    pub fn per_class_accuracy(&self, label: Label) -> Option<f64> {
        let total = self.row_total(label);
        if total == 0 {
            return None;
        }
        Some(self.counts[label.index()][label.index()] as f64 / total as f64)
    }

    pub fn overall_accuracy(&self) -> f64 {
        let correct: usize = (0..3).map(|i| self.counts[i][i]).sum();
        let total: usize = self.counts.iter().flatten().sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    /// Plain-text table with per-class accuracy percentages.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("truth\\pred      Pass     Fail1     Fail2   accuracy\n");
        for label in Label::ALL {
            let row = self.counts[label.index()];
            let acc = self
                .per_class_accuracy(label)
                .map(|a| format!("{:8.2}%", a * 100.0))
                .unwrap_or_else(|| "       -".into());
            s.push_str(&format!(
                "{:<10} {:9} {:9} {:9} {}\n",
                label.to_string(),
                row[0],
                row[1],
                row[2],
                acc
            ));
        }
        s.push_str(&format!(
            "overall accuracy: {:.2}%\n",
            self.overall_accuracy() * 100.0
        ));
        s
    }
}

/// A case ready for training: extracted features, its label, and the id of
/// the capture it came from (augmented variants share it).
#[derive(Debug, Clone)]
pub struct FeatureCase {
    pub features: FeatureVector,
    pub label: Label,
    pub group_id: String,
}

/// Per-fold accuracies from cross-validation.
#[derive(Debug, Clone)]
pub struct FoldReport {
    pub per_fold: Vec<f64>,
    pub fold_sizes: Vec<usize>,
}

impl FoldReport {
    pub fn mean_accuracy(&self) -> f64 {
        self.per_fold.iter().sum::<f64>() / self.per_fold.len() as f64
    }
}

/// Partitions group ids into k folds, stratified by label: groups of each
/// label are shuffled (seeded) and dealt round-robin. Each returned entry
/// is the fold index of the corresponding case.
pub fn stratified_group_folds(
    cases: &[FeatureCase],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::BadFoldCount(k));
    }
    // Unique groups per label, in first-appearance order for determinism.
    let mut groups: Vec<(String, Label)> = Vec::new();
    for case in cases {
        if !groups.iter().any(|(g, _)| g == &case.group_id) {
            groups.push((case.group_id.clone(), case.label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_group: std::collections::HashMap<String, usize> =
        std::collections::HashMap::new();
    for label in Label::ALL {
        let mut of_label: Vec<&(String, Label)> =
            groups.iter().filter(|(_, l)| *l == label).collect();
        of_label.shuffle(&mut rng);
        for (i, (g, _)) in of_label.into_iter().enumerate() {
            fold_of_group.insert(g.clone(), i % k);
        }
    }
    let assignment: Vec<usize> = cases
        .iter()
        .map(|c| fold_of_group[&c.group_id])
        .collect();
    for fold in 0..k {
        if !assignment.contains(&fold) {
            return Err(EvalError::EmptyFold(fold, k));
        }
    }
    Ok(assignment)
}

/// Stratified, leakage-free k-fold validation: train on k-1 folds, score
/// the held-out fold, report per-fold accuracy.
pub fn kfold_validate(
    cases: &[FeatureCase],
    k: usize,
    seed: u64,
    hyper: &SvmHyper,
) -> Result<FoldReport, EvalError> {
    let assignment = stratified_group_folds(cases, k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    let mut fold_sizes = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<(FeatureVector, Label)> = cases
            .iter()
            .zip(&assignment)
            .filter(|(_, &f)| f != fold)
            .map(|(c, _)| (c.features, c.label))
            .collect();
        let test: Vec<&FeatureCase> = cases
            .iter()
            .zip(&assignment)
            .filter(|(_, &f)| f == fold)
            .map(|(c, _)| c)
            .collect();
        let model = train_svm(&train, hyper)?;
        let correct = test
            .iter()
            .filter(|c| matches!(model.classify(&c.features), Ok(p) if p == c.label))
            .count();
        per_fold.push(correct as f64 / test.len() as f64);
        fold_sizes.push(test.len());
    }
    Ok(FoldReport {
        per_fold,
        fold_sizes,
    })
}
