//! Desk-scale pluggable classifiers for the cleaning pipeline: full-batch
//! softmax regression and a nearest-centroid baseline. Training is
//! deterministic (zero initialization, fixed-order accumulation), so
//! pipeline runs reproduce exactly.

use crate::error::{Error, Result};
use crate::multinomial::ProbabilityVector;
use crate::neighborhood::FeatureMatrix;

/// Classifier family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    SoftmaxRegression,
    NearestCentroid,
}

/// Training hyperparameters; the gradient fields only apply to softmax
/// regression.
#[derive(Debug, Clone)]
pub struct ClassifierSpec {
    kind: ClassifierKind,
    learning_rate: f64,
    steps: usize,
    weight_decay: f64,
}

impl ClassifierSpec {
    pub fn new(
        kind: ClassifierKind,
        learning_rate: f64,
        steps: usize,
        weight_decay: f64,
    ) -> Result<Self> {
        if kind == ClassifierKind::SoftmaxRegression {
            if steps == 0 {
                return Err(Error::InvalidArgument(
                    "softmax regression needs at least one training step".into(),
                ));
            }
            if !(learning_rate > 0.0 && learning_rate.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "learning rate must be positive and finite, got {learning_rate}"
                )));
            }
            if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "weight decay must be non-negative and finite, got {weight_decay}"
                )));
            }
        }
        Ok(Self { kind, learning_rate, steps, weight_decay })
    }

    pub fn softmax(learning_rate: f64, steps: usize, weight_decay: f64) -> Result<Self> {
        Self::new(ClassifierKind::SoftmaxRegression, learning_rate, steps, weight_decay)
    }

    pub fn nearest_centroid() -> Self {
        Self {
            kind: ClassifierKind::NearestCentroid,
            learning_rate: 0.0,
            steps: 0,
            weight_decay: 0.0,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::SoftmaxRegression,
            learning_rate: 0.5,
            steps: 200,
            weight_decay: 1e-4,
        }
    }
}

/// Supervision for one training pass: hard class indices or per-sample
/// class posteriors.
#[derive(Debug, Clone, Copy)]
pub enum TrainingTargets<'a> {
    Hard(&'a [usize]),
    Soft(&'a [ProbabilityVector]),
}

impl TrainingTargets<'_> {
    fn len(&self) -> usize {
        match self {
            Self::Hard(labels) => labels.len(),
            Self::Soft(rows) => rows.len(),
        }
    }

    fn weight(&self, i: usize, c: usize, class_count: usize) -> Result<f64> {
        match self {
            Self::Hard(labels) => {
                if labels[i] >= class_count {
                    return Err(Error::InvalidArgument(format!(
                        "label {} at index {i} exceeds {class_count} classes",
                        labels[i]
                    )));
                }
                Ok(if labels[i] == c { 1.0 } else { 0.0 })
            }
            Self::Soft(rows) => {
                if rows[i].len() != class_count {
                    return Err(Error::DimensionMismatch(format!(
                        "posterior {i} covers {} classes, expected {class_count}",
                        rows[i].len()
                    )));
                }
                Ok(rows[i].get(c))
            }
        }
    }
}

/// A trained classifier.
#[derive(Debug, Clone)]
pub enum ClassifierState {
    /// Linear softmax model; weights laid out (dim + 1) x classes with the
    /// bias in the last row.
    Softmax { dim: usize, class_count: usize, weights: Vec<f64> },
    /// Per-class feature centroids.
    Centroid { class_count: usize, centroids: Vec<Vec<f64>> },
}

impl ClassifierState {
    /// Train from scratch on the given features and targets. Returns the
    /// state plus non-fatal warnings (classes with no training mass).
    pub fn train(
        features: &FeatureMatrix,
        targets: TrainingTargets<'_>,
        class_count: usize,
        spec: &ClassifierSpec,
    ) -> Result<(Self, Vec<String>)> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "classifier needs at least 2 classes, got {class_count}"
            )));
        }
        if targets.len() != features.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} feature rows",
                targets.len(),
                features.rows()
            )));
        }
        match spec.kind() {
            ClassifierKind::SoftmaxRegression => {
                let state = train_softmax(features, &targets, class_count, spec)?;
                Ok((state, Vec::new()))
            }
            ClassifierKind::NearestCentroid => {
                train_centroids(features, &targets, class_count)
            }
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Self::Softmax { class_count, .. } | Self::Centroid { class_count, .. } => {
                *class_count
            }
        }
    }

    /// Per-class decision scores for one feature row: logits for the
    /// softmax model, negated squared centroid distances otherwise. Also
    /// serves as the evolving representation option in the pipeline.
    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        match self {
            Self::Softmax { dim, class_count, weights } => {
                let mut scores = vec![0.0; *class_count];
                for (r, &x) in row.iter().enumerate() {
                    for (c, score) in scores.iter_mut().enumerate() {
                        *score += x * weights[r * class_count + c];
                    }
                }
                for (c, score) in scores.iter_mut().enumerate() {
                    *score += weights[dim * class_count + c];
                }
                scores
            }
            Self::Centroid { centroids, .. } => centroids
                .iter()
                .map(|center| {
                    -row.iter().zip(center).map(|(x, m)| (x - m) * (x - m)).sum::<f64>()
                })
                .collect(),
        }
    }

    /// Predicted class; score ties break toward the lower index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let scores = self.class_scores(row);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    /// Fraction of rows whose prediction matches the given labels.
    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[usize]) -> f64 {
        let hits = labels
            .iter()
            .enumerate()
            .filter(|&(i, &label)| self.predict(features.row(i)) == label)
            .count();
        hits as f64 / labels.len().max(1) as f64
    }
}

/// Full-batch gradient descent on the cross-entropy from zero-initialized
/// weights; the bias row is exempt from weight decay.
fn train_softmax(
    features: &FeatureMatrix,
    targets: &TrainingTargets<'_>,
    class_count: usize,
    spec: &ClassifierSpec,
) -> Result<ClassifierState> {
    let count = features.rows();
    let dim = features.dim();
    let mut weights = vec![0.0; (dim + 1) * class_count];
    let mut target_rows = vec![0.0; count * class_count];
    for i in 0..count {
        for c in 0..class_count {
            target_rows[i * class_count + c] = targets.weight(i, c, class_count)?;
        }
    }

    let mut gradient = vec![0.0; weights.len()];
    for _ in 0..spec.steps() {
        gradient.fill(0.0);
        for i in 0..count {
            let row = features.row(i);
            let mut logits = vec![0.0; class_count];
            for (r, &x) in row.iter().enumerate() {
                for (c, logit) in logits.iter_mut().enumerate() {
                    *logit += x * weights[r * class_count + c];
                }
            }
            for (c, logit) in logits.iter_mut().enumerate() {
                *logit += weights[dim * class_count + c];
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for logit in &mut logits {
                *logit = (*logit - max).exp();
                total += *logit;
            }
            for c in 0..class_count {
                let residual = logits[c] / total - target_rows[i * class_count + c];
                for (r, &x) in row.iter().enumerate() {
                    gradient[r * class_count + c] += x * residual;
                }
                gradient[dim * class_count + c] += residual;
            }
        }
        let scale = 1.0 / count as f64;
        for (idx, g) in gradient.iter().enumerate() {
            let decay = if idx < dim * class_count { spec.weight_decay() * weights[idx] } else { 0.0 };
            weights[idx] -= spec.learning_rate() * (g * scale + decay);
        }
    }
    Ok(ClassifierState::Softmax { dim, class_count, weights })
}

/// Per-class (possibly soft-weighted) feature means; a class with no mass
/// falls back to the global mean and is reported as a warning.
fn train_centroids(
    features: &FeatureMatrix,
    targets: &TrainingTargets<'_>,
    class_count: usize,
) -> Result<(ClassifierState, Vec<String>)> {
    let count = features.rows();
    let dim = features.dim();
    let mut sums = vec![vec![0.0; dim]; class_count];
    let mut mass = vec![0.0; class_count];
    let mut global = vec![0.0; dim];
    for i in 0..count {
        let row = features.row(i);
        for (g, &x) in global.iter_mut().zip(row) {
            *g += x;
        }
        for c in 0..class_count {
            let w = targets.weight(i, c, class_count)?;
            if w > 0.0 {
                mass[c] += w;
                for (s, &x) in sums[c].iter_mut().zip(row) {
                    *s += w * x;
                }
            }
        }
    }
    for g in &mut global {
        *g /= count as f64;
    }
    let mut warnings = Vec::new();
    let centroids = (0..class_count)
        .map(|c| {
            if mass[c] > 0.0 {
                sums[c].iter().map(|s| s / mass[c]).collect()
            } else {
                warnings.push(format!(
                    "class {c} has no training mass; centroid fell back to the global mean"
                ));
                global.clone()
            }
        })
        .collect();
    Ok((ClassifierState::Centroid { class_count, centroids }, warnings))
}
