//! Gaussian-cluster synthetic datasets for desk-scale experiments: one
//! isotropic cluster per class on a deterministic center layout, balanced
//! class assignment, reproducible from a seed.

use crate::error::{Error, Result};
use crate::neighborhood::FeatureMatrix;
use crate::rng;
use rand::RngExt;
use rand_distr::StandardNormal;

/// Shape of a synthetic cluster dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    sample_count: usize,
    dim: usize,
    class_count: usize,
    /// Distance scale between cluster centers.
    separation: f64,
    /// Within-cluster standard deviation.
    scale: f64,
    seed: u64,
}

impl SyntheticSpec {
    pub fn new(
        sample_count: usize,
        dim: usize,
        class_count: usize,
        separation: f64,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if sample_count == 0 || dim == 0 || class_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample count, dimension, and class count must be positive, got {sample_count}, {dim}, {class_count}"
            )));
        }
        if sample_count < class_count {
            return Err(Error::InvalidArgument(format!(
                "{sample_count} samples cannot cover {class_count} classes"
            )));
        }
        if !(separation >= 0.0 && separation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "separation must be non-negative and finite, got {separation}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { sample_count, dim, class_count, separation, scale, seed })
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Center of class `c`: placed on axis `c mod dim` at radius
    /// `separation · (1 + c / dim)`, so centers stay pairwise at least
    /// `separation` apart for any class count.
    pub fn center(&self, c: usize) -> Vec<f64> {
        let mut center = vec![0.0; self.dim];
        center[c % self.dim] = self.separation * (1.0 + (c / self.dim) as f64);
        center
    }
}

/// Draw the dataset: balanced labels `i mod C` and features
/// `center(label) + scale · N(0, I)`.
pub fn generate(spec: &SyntheticSpec) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = rng::root(spec.seed());
    let centers: Vec<Vec<f64>> = (0..spec.class_count()).map(|c| spec.center(c)).collect();
    let mut labels = Vec::with_capacity(spec.sample_count());
    let mut data = Vec::with_capacity(spec.sample_count() * spec.dim());
    for i in 0..spec.sample_count() {
        let label = i % spec.class_count();
        labels.push(label);
        for &coordinate in &centers[label] {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(coordinate + spec.scale() * noise);
        }
    }
    let features = FeatureMatrix::new(spec.sample_count(), spec.dim(), data)
        .expect("normal draws are finite");
    (features, labels)
}
