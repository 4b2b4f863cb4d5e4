//! JSON config schemas for the commands. Every field has a default, so
//! a config file only states what it overrides; the fully resolved
//! config is what the manifest snapshots.

use crate::error::{CliError, Result};
use mixclean::pipeline::{
    DEFAULT_EM_ITERS, DEFAULT_EPOCHS, DEFAULT_LABEL_SETS, DEFAULT_MU, DEFAULT_NEIGHBOURS,
    DEFAULT_OUTER_TOL, DEFAULT_PRIOR_STRENGTH, DEFAULT_SMOOTHING,
};
use mixclean::{
    identifiability_bound, ApproximationForm, ClassifierKind, ClassifierSpec, DirichletPriors,
    EmConfig, EmMode, NoiseKind, NoiseSpec, PipelineConfig, Representation, SyntheticSpec,
};
use serde::{Deserialize, Serialize};

fn deserialize_or_reject<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| CliError::Validation(format!("config: {e}")))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Mle,
    Map,
}

impl From<ModeName> for EmMode {
    fn from(name: ModeName) -> Self {
        match name {
            ModeName::Mle => EmMode::Mle,
            ModeName::Map => EmMode::Map,
        }
    }
}

/// EM settings shared by `fit` and the sweep. Priors are symmetric:
/// `alpha` on the mixing weights, `beta` on each transition column.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub mode: ModeName,
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub smoothing: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: ModeName::Map,
            alpha: 20.0,
            beta: 5.0,
            max_iters: 100,
            tol: 1e-6,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

impl FitConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        deserialize_or_reject(value)
    }

    pub fn priors(&self, class_count: usize) -> Result<DirichletPriors> {
        DirichletPriors::symmetric(class_count, self.alpha, self.beta).map_err(CliError::from)
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            mode: self.mode.into(),
            max_iters: self.max_iters,
            tol: self.tol,
            ..EmConfig::default()
        }
    }
}

/// Grid for the identifiability sweep: every combination of class count,
/// trials per set, and set count is repeated `reps` times, each fit from
/// `inits` different initializations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub class_counts: Vec<usize>,
    pub trial_grid: Vec<u64>,
    pub set_grid: Vec<usize>,
    pub reps: usize,
    pub inits: usize,
    /// Fresh label sets drawn from each ground truth to compare held-out
    /// log-likelihood across initializations.
    pub holdout_sets: usize,
    pub em: FitConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            class_counts: vec![2, 3],
            trial_grid: vec![1, 3, 5, 9],
            set_grid: vec![2000],
            reps: 20,
            inits: 3,
            holdout_sets: 500,
            em: FitConfig { mode: ModeName::Mle, max_iters: 300, ..FitConfig::default() },
        }
    }
}

impl SweepConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let config: Self = deserialize_or_reject(value)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_counts.is_empty() || self.trial_grid.is_empty() || self.set_grid.is_empty() {
            return Err(CliError::Validation(
                "sweep grids must each have at least one entry".into(),
            ));
        }
        if self.class_counts.iter().any(|&c| c < 2) {
            return Err(CliError::Validation("class counts must be at least 2".into()));
        }
        if self.reps == 0 || self.inits == 0 {
            return Err(CliError::Validation("reps and inits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproximationName {
    Full,
    Simplified,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationName {
    Static,
    ClassifierScores,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierName {
    SoftmaxRegression,
    NearestCentroid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierName,
    pub learning_rate: f64,
    pub steps: usize,
    pub weight_decay: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let spec = ClassifierSpec::default();
        Self {
            kind: ClassifierName::SoftmaxRegression,
            learning_rate: spec.learning_rate(),
            steps: spec.steps(),
            weight_decay: spec.weight_decay(),
        }
    }
}

impl ClassifierConfig {
    fn resolve(&self) -> Result<ClassifierSpec> {
        let kind = match self.kind {
            ClassifierName::SoftmaxRegression => ClassifierKind::SoftmaxRegression,
            ClassifierName::NearestCentroid => ClassifierKind::NearestCentroid,
        };
        ClassifierSpec::new(kind, self.learning_rate, self.steps, self.weight_decay)
            .map_err(CliError::from)
    }
}

/// Cleaning-pipeline settings. `trials` defaults to the identifiability
/// bound 2C−1 once the class count is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    pub class_count: Option<usize>,
    pub neighbours: usize,
    pub label_sets: usize,
    pub trials: Option<u64>,
    pub mu: f64,
    pub em_iters: usize,
    pub em_tol: f64,
    pub mode: ModeName,
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub outer_tol: f64,
    pub approximation: ApproximationName,
    pub representation: RepresentationName,
    pub cross_cleaning: bool,
    pub soft_labels: bool,
    pub classifier: ClassifierConfig,
    pub lambda: f64,
    pub sigma: f64,
    pub subsample: Option<usize>,
    pub smoothing: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            class_count: None,
            neighbours: DEFAULT_NEIGHBOURS,
            label_sets: DEFAULT_LABEL_SETS,
            trials: None,
            mu: DEFAULT_MU,
            em_iters: DEFAULT_EM_ITERS,
            em_tol: 1e-6,
            mode: ModeName::Map,
            alpha: DEFAULT_PRIOR_STRENGTH,
            beta: DEFAULT_PRIOR_STRENGTH,
            epochs: DEFAULT_EPOCHS,
            outer_tol: DEFAULT_OUTER_TOL,
            approximation: ApproximationName::Simplified,
            representation: RepresentationName::Static,
            cross_cleaning: false,
            soft_labels: false,
            classifier: ClassifierConfig::default(),
            lambda: 0.0,
            sigma: 1.0,
            subsample: None,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

impl CleanConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        deserialize_or_reject(value)
    }

    /// Resolve against the dataset's observed class count; an explicit
    /// class_count must cover every label actually seen.
    pub fn resolve(&self, observed_classes: usize, seed: u64) -> Result<PipelineConfig> {
        let class_count = match self.class_count {
            Some(c) if c < observed_classes => {
                return Err(CliError::Validation(format!(
                    "config says {c} classes but labels reach class {}",
                    observed_classes - 1
                )));
            }
            Some(c) => c,
            None => observed_classes,
        };
        Ok(PipelineConfig {
            neighbours: self.neighbours,
            label_sets: self.label_sets,
            trials: self.trials.unwrap_or_else(|| identifiability_bound(class_count)),
            mu: self.mu,
            em_iters: self.em_iters,
            em_tol: self.em_tol,
            mode: self.mode.into(),
            priors: DirichletPriors::symmetric(class_count, self.alpha, self.beta)?,
            epochs: self.epochs,
            outer_tol: self.outer_tol,
            approximation: match self.approximation {
                ApproximationName::Full => ApproximationForm::Full,
                ApproximationName::Simplified => ApproximationForm::Simplified,
            },
            representation: match self.representation {
                RepresentationName::Static => Representation::Static,
                RepresentationName::ClassifierScores => Representation::ClassifierScores,
            },
            cross_cleaning: self.cross_cleaning,
            soft_labels: self.soft_labels,
            classifier: self.classifier.resolve()?,
            lambda: self.lambda,
            sigma: self.sigma,
            subsample: self.subsample,
            smoothing: self.smoothing,
            seed,
        })
    }

    pub fn class_count_for(&self, observed_classes: usize) -> usize {
        self.class_count.unwrap_or(observed_classes).max(observed_classes)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    Symmetric,
    Asymmetric,
    InstanceDependent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseName,
    pub rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kind: NoiseName::Symmetric, rate: 0.3 }
    }
}

/// Synthetic-dataset generator: Gaussian clusters plus injected noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sample_count: usize,
    pub dim: usize,
    pub class_count: usize,
    pub separation: f64,
    pub scale: f64,
    pub noise: NoiseConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            dim: 2,
            class_count: 2,
            separation: 6.0,
            scale: 1.0,
            noise: NoiseConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        deserialize_or_reject(value)
    }

    pub fn generator_spec(&self, seed: u64) -> Result<SyntheticSpec> {
        SyntheticSpec::new(
            self.sample_count,
            self.dim,
            self.class_count,
            self.separation,
            self.scale,
            seed,
        )
        .map_err(CliError::from)
    }

    /// Noise injection runs on a derived seed so the cluster layout and
    /// the flip pattern are independent draws.
    pub fn noise_spec(&self, seed: u64) -> Result<NoiseSpec> {
        let kind = match self.noise.kind {
            NoiseName::Symmetric => NoiseKind::Symmetric,
            NoiseName::Asymmetric => NoiseKind::Asymmetric,
            NoiseName::InstanceDependent => NoiseKind::InstanceDependent { projection: None },
        };
        NoiseSpec::new(kind, self.noise.rate, seed.wrapping_add(1)).map_err(CliError::from)
    }
}
