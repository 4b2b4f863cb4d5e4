//! Progressive label cleaning: classifier warm-up on the observed noisy
//! labels, then per-epoch neighbour search, noisy-distribution blending,
//! label-set sampling, per-sample EM, pseudo-label refresh, and classifier
//! retraining, with optional two-model cross-cleaning.
//!
//! The per-sample inner loop is a parallel map with read-only shared state
//! and an rng stream per (epoch, model, sample); classifier updates and
//! the posterior swap form a sequential barrier, so runs are reproducible
//! for a fixed config and seed regardless of thread count.

use crate::classifier::{ClassifierSpec, ClassifierState, TrainingTargets};
use crate::em::{self, DirichletPriors, EmConfig, EmMode};
use crate::error::{Error, Result};
use crate::multinomial::{MixtureParams, ProbabilityVector};
use crate::neighborhood::{self, FeatureMatrix};
use crate::noise::{self, NoisyLabelDistribution};
use crate::rng;
use rayon::prelude::*;
use std::time::Instant;

pub const DEFAULT_NEIGHBOURS: usize = 10;
pub const DEFAULT_LABEL_SETS: usize = 100;
pub const DEFAULT_MU: f64 = 0.5;
/// One EM update per sample per epoch. The warm start carries parameters
/// across epochs, so the outer loop is the real iteration; a larger cap
/// lets each sample's mixture wander along its unidentified directions
/// (the sampled sets are near-categorical, which pins down far fewer
/// parameters than the mixture has) before the neighbourhood consensus
/// has settled, and the transition columns lose diagonal dominance.
pub const DEFAULT_EM_ITERS: usize = 1;
/// Mild symmetric Dirichlet strength for the per-sample MAP fits inside
/// the cleaning loop. Strong priors are counterproductive here: their
/// pseudo-counts rival the per-sample set count L, keep dead mixture
/// components alive, and make the uniform posterior the MAP optimum on
/// near-categorical sets, which erases the labels being cleaned.
pub const DEFAULT_PRIOR_STRENGTH: f64 = 2.0;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_OUTER_TOL: f64 = 1e-3;
/// Smoothing of the one-hot / identity initialization that keeps the
/// starting parameters diagonally dominant.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Features, observed noisy labels, and (for evaluation only) the ground
/// truth. Cleaning never reads the true labels; they are reachable only
/// through the explicitly named evaluation accessor.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: FeatureMatrix,
    noisy_labels: Vec<usize>,
    true_labels: Option<Vec<usize>>,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        features: FeatureMatrix,
        noisy_labels: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs at least 2 classes, got {class_count}"
            )));
        }
        if noisy_labels.len() != features.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} noisy labels for {} feature rows",
                noisy_labels.len(),
                features.rows()
            )));
        }
        check_label_range(&noisy_labels, class_count, "noisy")?;
        if let Some(truth) = &true_labels {
            if truth.len() != features.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} true labels for {} feature rows",
                    truth.len(),
                    features.rows()
                )));
            }
            check_label_range(truth, class_count, "true")?;
        }
        Ok(Self { features, noisy_labels, true_labels, class_count })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn noisy_labels(&self) -> &[usize] {
        &self.noisy_labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn sample_count(&self) -> usize {
        self.features.rows()
    }

    /// Ground truth for metrics only; no cleaning step calls this.
    pub fn true_labels_for_evaluation(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }
}

fn check_label_range(labels: &[usize], class_count: usize, what: &str) -> Result<()> {
    for (i, &label) in labels.iter().enumerate() {
        if label >= class_count {
            return Err(Error::InvalidArgument(format!(
                "{what} label {label} at index {i} exceeds {class_count} classes"
            )));
        }
    }
    Ok(())
}

/// Which noisy-distribution form the per-sample blend uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproximationForm {
    /// Keep every multinomial component (the (K+1)·C mixture).
    Full,
    /// Blend pseudo-clean posteriors into one categorical.
    Simplified,
}

/// Which feature representation drives neighbour search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// The dataset's feature matrix, unchanged across epochs.
    Static,
    /// The classifier's per-class decision scores, recomputed each epoch
    /// so the representation evolves with training.
    ClassifierScores,
}

/// Full parameterization of a cleaning run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// K, nearest neighbours per sample.
    pub neighbours: usize,
    /// L, label sets sampled per sample per epoch.
    pub label_sets: usize,
    /// N, label draws per set; identifiability needs N ≥ 2C−1.
    pub trials: u64,
    /// Trade-off between a sample's own distribution (μ) and its
    /// neighbourhood (1−μ).
    pub mu: f64,
    /// η, per-sample EM iteration cap.
    pub em_iters: usize,
    pub em_tol: f64,
    pub mode: EmMode,
    pub priors: DirichletPriors,
    pub epochs: usize,
    /// Stop early when no sample's posterior moved more than this (ℓ2).
    pub outer_tol: f64,
    pub approximation: ApproximationForm,
    pub representation: Representation,
    pub cross_cleaning: bool,
    /// Train the classifier on full posteriors instead of argmax labels.
    pub soft_labels: bool,
    pub classifier: ClassifierSpec,
    /// Locality-coding penalty and adaptor bandwidth.
    pub lambda: f64,
    pub sigma: f64,
    /// Restrict each sample's neighbour search to a random subset of this
    /// size (scale knob for large M).
    pub subsample: Option<usize>,
    pub smoothing: f64,
    pub seed: u64,
}

impl PipelineConfig {
    /// Defaults tuned for desk scale: K=10, L=100, N at the
    /// identifiability bound, μ=0.5, one EM update per epoch, MAP with a
    /// mild symmetric prior.
    pub fn recommended(class_count: usize, seed: u64) -> Self {
        Self {
            neighbours: DEFAULT_NEIGHBOURS,
            label_sets: DEFAULT_LABEL_SETS,
            trials: em::identifiability_bound(class_count),
            mu: DEFAULT_MU,
            em_iters: DEFAULT_EM_ITERS,
            em_tol: 1e-6,
            mode: EmMode::Map,
            priors: DirichletPriors::symmetric(
                class_count,
                DEFAULT_PRIOR_STRENGTH,
                DEFAULT_PRIOR_STRENGTH,
            )
            .expect("symmetric positive priors are always valid"),
            epochs: DEFAULT_EPOCHS,
            outer_tol: DEFAULT_OUTER_TOL,
            approximation: ApproximationForm::Simplified,
            representation: Representation::Static,
            cross_cleaning: false,
            soft_labels: false,
            classifier: ClassifierSpec::default(),
            lambda: 0.0,
            sigma: 1.0,
            subsample: None,
            smoothing: DEFAULT_SMOOTHING,
            seed,
        }
    }

    /// Check the config against a dataset; returns non-fatal warnings
    /// (an undersampled N) on success.
    pub fn validate(&self, dataset: &Dataset) -> Result<Vec<String>> {
        if self.neighbours == 0 || self.label_sets == 0 || self.trials == 0 || self.em_iters == 0
        {
            return Err(Error::InvalidArgument(
                "neighbours, label_sets, trials, and em_iters must all be at least 1".into(),
            ));
        }
        if self.neighbours >= dataset.sample_count() {
            return Err(Error::InvalidArgument(format!(
                "{} neighbours cannot come from {} samples",
                self.neighbours,
                dataset.sample_count()
            )));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if self.priors.class_count() != dataset.class_count() {
            return Err(Error::DimensionMismatch(format!(
                "priors cover {} classes, dataset has {}",
                self.priors.class_count(),
                dataset.class_count()
            )));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must lie in [0, 1), got {}",
                self.smoothing
            )));
        }
        if !(self.outer_tol > 0.0 && self.outer_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "outer_tol must be positive and finite, got {}",
                self.outer_tol
            )));
        }
        if let Some(subsample) = self.subsample {
            if subsample <= self.neighbours {
                return Err(Error::InvalidArgument(format!(
                    "subsample size {subsample} cannot supply {} neighbours",
                    self.neighbours
                )));
            }
        }
        let mut warnings = Vec::new();
        let bound = em::identifiability_bound(dataset.class_count());
        if self.trials < bound {
            warnings.push(format!(
                "N={} is below the identifiability bound {bound} for {} classes; recovered parameters may not be unique",
                self.trials,
                dataset.class_count()
            ));
        }
        Ok(warnings)
    }
}

/// Per-epoch metrics. Ground-truth fields are populated only when the
/// dataset carries evaluation labels; with no held-out split at desk
/// scale, `test_accuracy` is the classifier's accuracy on the training
/// features against those labels.
#[derive(Debug, Clone)]
pub struct EpochReport {
    pub epoch: usize,
    /// Share of samples whose argmax pseudo-label matches ground truth.
    pub clean_fraction: Option<f64>,
    pub mean_em_iterations: f64,
    /// Sum of final per-sample EM objectives (degenerate samples excluded).
    pub objective_sum: f64,
    pub test_accuracy: Option<f64>,
    /// Samples whose EM hit a zero-likelihood label set and kept their
    /// previous parameters this epoch.
    pub degenerate_samples: usize,
    pub wall_time_s: f64,
}

struct Track {
    params: Vec<MixtureParams>,
    posteriors: Vec<ProbabilityVector>,
}

impl Track {
    fn fresh(dataset: &Dataset, config: &PipelineConfig) -> Result<Self> {
        let params: Vec<MixtureParams> = dataset
            .noisy_labels()
            .iter()
            .map(|&label| {
                MixtureParams::smoothed_from_label(
                    dataset.class_count(),
                    label,
                    config.trials,
                    config.smoothing,
                )
            })
            .collect::<Result<_>>()?;
        let posteriors = params.iter().map(|p| p.pi().clone()).collect();
        Ok(Self { params, posteriors })
    }
}

/// Mutable cleaning state: one classifier and one (π, ρ) track, or two of
/// each under cross-cleaning.
pub struct PipelineState {
    epoch: usize,
    tracks: Vec<Track>,
    models: Vec<ClassifierState>,
    warnings: Vec<String>,
}

impl PipelineState {
    /// Warm the classifier up on the noisy labels and set every sample's
    /// parameters to the smoothed one-hot / smoothed identity start.
    pub fn initialize(dataset: &Dataset, config: &PipelineConfig) -> Result<Self> {
        let mut warnings = config.validate(dataset)?;
        let (model, train_warnings) = warm_up(dataset, &config.classifier)?;
        warnings.extend(train_warnings);
        let copies = if config.cross_cleaning { 2 } else { 1 };
        let mut tracks = Vec::with_capacity(copies);
        let mut models = Vec::with_capacity(copies);
        for _ in 0..copies {
            tracks.push(Track::fresh(dataset, config)?);
            models.push(model.clone());
        }
        Ok(Self { epoch: 0, tracks, models, warnings })
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn posteriors(&self) -> &[ProbabilityVector] {
        &self.tracks[0].posteriors
    }

    pub fn params(&self) -> &[MixtureParams] {
        &self.tracks[0].params
    }

    pub fn classifier(&self) -> &ClassifierState {
        &self.models[0]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Hard pseudo-labels: argmax posterior, ties toward the lower class.
    pub fn pseudo_labels(&self) -> Vec<usize> {
        self.tracks[0].posteriors.iter().map(ProbabilityVector::argmax).collect()
    }
}

/// Train the pluggable classifier on the observed noisy labels.
pub fn warm_up(
    dataset: &Dataset,
    spec: &ClassifierSpec,
) -> Result<(ClassifierState, Vec<String>)> {
    ClassifierState::train(
        dataset.features(),
        TrainingTargets::Hard(dataset.noisy_labels()),
        dataset.class_count(),
        spec,
    )
}

/// Share of samples whose observed noisy label already matches ground
/// truth; the baseline every cleaning epoch is measured against.
pub fn initial_clean_fraction(dataset: &Dataset) -> Option<f64> {
    dataset.true_labels_for_evaluation().map(|truth| {
        let hits =
            truth.iter().zip(dataset.noisy_labels()).filter(|(t, n)| t == n).count();
        hits as f64 / truth.len().max(1) as f64
    })
}

struct SampleOutcome {
    params: MixtureParams,
    posterior: ProbabilityVector,
    iterations: usize,
    objective: f64,
    degenerate: bool,
}

/// One pass of Algorithm-style cleaning over every sample, then the
/// classifier refresh. A sample whose EM degenerates (every component at
/// zero likelihood) keeps its previous parameters and is counted in the
/// report.
pub fn clean_epoch(
    dataset: &Dataset,
    state: &mut PipelineState,
    config: &PipelineConfig,
) -> Result<EpochReport> {
    let started = Instant::now();
    let epoch = state.epoch;
    let with_context = |e: Error| Error::Pipeline { epoch, source: Box::new(e) };
    let em_config = EmConfig {
        mode: config.mode,
        max_iters: config.em_iters,
        tol: config.em_tol,
        ..EmConfig::default()
    };
    let model_count = state.models.len();

    let mut new_tracks = Vec::with_capacity(model_count);
    let mut stats = Vec::with_capacity(model_count);
    for m in 0..model_count {
        let evolved;
        let features = match config.representation {
            Representation::Static => dataset.features(),
            Representation::ClassifierScores => {
                evolved = score_matrix(&state.models[m], dataset.features());
                &evolved
            }
        };
        let track = &state.tracks[m];
        let stream_epoch = (epoch * model_count + m) as u32;
        let outcomes: Vec<SampleOutcome> = (0..dataset.sample_count())
            .into_par_iter()
            .map(|i| clean_sample(i, dataset, features, track, config, &em_config, stream_epoch))
            .collect::<Result<_>>()
            .map_err(with_context)?;

        let mut params = Vec::with_capacity(outcomes.len());
        let mut posteriors = Vec::with_capacity(outcomes.len());
        let mut iterations = 0usize;
        let mut objective_sum = 0.0;
        let mut degenerate = 0usize;
        for outcome in outcomes {
            iterations += outcome.iterations;
            if outcome.degenerate {
                degenerate += 1;
            } else {
                objective_sum += outcome.objective;
            }
            params.push(outcome.params);
            posteriors.push(outcome.posterior);
        }
        new_tracks.push(Track { params, posteriors });
        stats.push((iterations, objective_sum, degenerate));
    }

    for m in 0..model_count {
        // Cross-cleaning: each model learns from its partner's pseudo-labels.
        let source = if config.cross_cleaning && model_count == 2 { 1 - m } else { m };
        let posteriors = &new_tracks[source].posteriors;
        let hard: Vec<usize>;
        let targets = if config.soft_labels {
            TrainingTargets::Soft(posteriors)
        } else {
            hard = posteriors.iter().map(ProbabilityVector::argmax).collect();
            TrainingTargets::Hard(&hard)
        };
        let (model, train_warnings) = ClassifierState::train(
            dataset.features(),
            targets,
            dataset.class_count(),
            &config.classifier,
        )
        .map_err(with_context)?;
        state.models[m] = model;
        for warning in train_warnings {
            state.warnings.push(format!("epoch {epoch}: {warning}"));
        }
    }
    state.tracks = new_tracks;
    state.epoch += 1;

    let (iterations, objective_sum, degenerate_samples) = stats[0];
    let posteriors = &state.tracks[0].posteriors;
    let clean_fraction = dataset.true_labels_for_evaluation().map(|truth| {
        let hits = truth
            .iter()
            .zip(posteriors)
            .filter(|&(&t, p)| p.argmax() == t)
            .count();
        hits as f64 / truth.len().max(1) as f64
    });
    let test_accuracy = dataset
        .true_labels_for_evaluation()
        .map(|truth| state.models[0].accuracy(dataset.features(), truth));
    Ok(EpochReport {
        epoch,
        clean_fraction,
        mean_em_iterations: iterations as f64 / dataset.sample_count() as f64,
        objective_sum,
        test_accuracy,
        degenerate_samples,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn clean_sample(
    i: usize,
    dataset: &Dataset,
    features: &FeatureMatrix,
    track: &Track,
    config: &PipelineConfig,
    em_config: &EmConfig,
    stream_epoch: u32,
) -> Result<SampleOutcome> {
    let mut stream = rng::sample_stream(config.seed, stream_epoch, i as u32);
    let neighbors = match config.subsample {
        Some(size) if size < dataset.sample_count() => {
            let picked =
                rand::seq::index::sample(&mut stream, dataset.sample_count(), size).into_vec();
            neighborhood::knn_search_among(features, i, config.neighbours, &picked)?
        }
        _ => neighborhood::knn_search(features, i, config.neighbours)?,
    };
    let columns: Vec<&[f64]> =
        neighbors.indices().iter().map(|&j| features.row(j)).collect();
    let coding =
        neighborhood::llc_solve(features.row(i), &columns, config.lambda, config.sigma)?;

    let dist: NoisyLabelDistribution = match config.approximation {
        ApproximationForm::Simplified => {
            let neighbour_posteriors: Vec<ProbabilityVector> = neighbors
                .indices()
                .iter()
                .map(|&j| track.posteriors[j].clone())
                .collect();
            noise::approximate_noisy_distribution_simplified(
                &track.posteriors[i],
                &neighbour_posteriors,
                &coding,
                config.mu,
            )?
        }
        ApproximationForm::Full => {
            let neighbour_params: Vec<MixtureParams> =
                neighbors.indices().iter().map(|&j| track.params[j].clone()).collect();
            noise::approximate_noisy_distribution_full(
                &track.params[i],
                &neighbour_params,
                &coding,
                config.mu,
            )?
        }
    };
    let sets = noise::sample_label_sets(&dist, config.trials, config.label_sets, &mut stream)?;

    match em::run_em(&sets, track.params[i].clone(), &config.priors, em_config) {
        Ok(result) => Ok(SampleOutcome {
            posterior: result.params.pi().clone(),
            iterations: result.iterations,
            objective: *result.objective_trace.last().expect("trace holds the init objective"),
            params: result.params,
            degenerate: false,
        }),
        Err(Error::DegenerateRow { .. }) => Ok(SampleOutcome {
            params: track.params[i].clone(),
            posterior: track.posteriors[i].clone(),
            iterations: 0,
            objective: 0.0,
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

fn score_matrix(model: &ClassifierState, features: &FeatureMatrix) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> =
        (0..features.rows()).map(|i| model.class_scores(features.row(i))).collect();
    FeatureMatrix::from_rows(rows).expect("classifier scores are finite")
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub reports: Vec<EpochReport>,
    pub posteriors: Vec<ProbabilityVector>,
    pub pseudo_labels: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Warm up, then clean until the epoch cap or until no sample's posterior
/// moves more than `outer_tol`.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let mut state = PipelineState::initialize(dataset, config)?;
    let mut reports = Vec::new();
    for _ in 0..config.epochs {
        let before = state.tracks[0].posteriors.clone();
        let report = clean_epoch(dataset, &mut state, config)?;
        reports.push(report);
        let max_change = before
            .iter()
            .zip(&state.tracks[0].posteriors)
            .map(|(a, b)| {
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if max_change < config.outer_tol {
            break;
        }
    }
    let pseudo_labels = state.pseudo_labels();
    let track = state.tracks.swap_remove(0);
    Ok(PipelineOutcome {
        reports,
        posteriors: track.posteriors,
        pseudo_labels,
        warnings: state.warnings,
    })
}
