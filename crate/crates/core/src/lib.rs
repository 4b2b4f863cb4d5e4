//! Identifiable learning from noisy labels via per-sample multinomial
//! mixtures.
//!
//! A sample with true-class uncertainty π and per-class label-corruption
//! columns ρ produces noisy labels distributed as the mixture
//! `Σ_c π_c · Mult(N, ρ_·c)`. With enough label draws per sample
//! (N ≥ 2C − 1 for C classes) the pair (π, ρ) is recoverable up to class
//! relabeling; with fewer draws it provably is not. This crate provides:
//!
//! - log-space multinomial and mixture primitives ([`multinomial`]),
//! - closed-form EM for the per-sample mixture, maximum-likelihood and
//!   Dirichlet-MAP variants, plus the identifiability bounds ([`em`]),
//! - permutation-aware parameter comparison ([`align`]),
//! - exact nearest-neighbour search and locality-constrained simplex
//!   coding ([`neighborhood`]),
//! - neighbourhood-blended noisy-label distributions, label-set sampling,
//!   synthetic noise injection, and a worked example of two distinct
//!   noise models with identical observable marginals ([`noise`]),
//! - a progressive label-cleaning pipeline with pluggable classifiers
//!   ([`pipeline`], [`classifier`], [`synth`]).

pub mod align;
pub mod classifier;
pub mod em;
pub mod error;
pub mod multinomial;
pub mod neighborhood;
pub mod noise;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use align::permutation_aligned_distance;
pub use classifier::{ClassifierKind, ClassifierSpec, ClassifierState, TrainingTargets};
pub use em::{
    categorical_mixture_bound, e_step, identifiability_bound, m_step_map, m_step_mle, run_em,
    DirichletPriors, EmConfig, EmMode, EmResult, Responsibilities,
};
pub use error::{Error, Result};
pub use multinomial::{
    log_sum_exp, mixture_log_likelihood, multinomial_log_pmf, sample_multinomial, CountVector,
    MixtureParams, ProbabilityVector, TransitionMatrix,
};
pub use neighborhood::{
    knn_search, knn_search_among, llc_solve, similarity_row, CodingVector, FeatureMatrix,
    NeighborSet,
};
pub use noise::{
    approximate_noisy_distribution_full, approximate_noisy_distribution_simplified, inject_noise,
    nonidentifiability_demo, sample_label_sets, NoiseKind, NoiseSpec, NoisyLabelDistribution,
    NonIdentifiabilityReport,
};
pub use pipeline::{
    clean_epoch, initial_clean_fraction, run_pipeline, warm_up, ApproximationForm, Dataset,
    EpochReport, PipelineConfig, PipelineOutcome, PipelineState, Representation,
};
pub use synth::{generate, SyntheticSpec};
