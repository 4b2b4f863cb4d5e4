//! Fit one per-sample multinomial mixture to a file of label sets: L
//! rows of C counts, every row summing to the same trial count N.

use super::CommandContext;
use crate::config::FitConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::RunManifest;
use mixclean::{
    identifiability_bound, run_em, CountVector, MixtureParams, ProbabilityVector,
    TransitionMatrix,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

pub const RESULT_FILE: &str = "fit_result.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub class_count: usize,
    pub trials: u64,
    pub set_count: usize,
    pub pi: Vec<f64>,
    /// Row-major; entry [r][c] is p(noisy = r | clean = c).
    pub rho: Vec<Vec<f64>>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub floored: bool,
}

/// Diagonally dominant starting point for a bag of label sets with no
/// designated noisy label: pooled empirical marginal (smoothed toward
/// uniform) for the mixing weights, smoothed identity for the columns.
pub fn default_init(
    sets: &[CountVector],
    class_count: usize,
    trials: u64,
    smoothing: f64,
) -> Result<MixtureParams> {
    let mut pooled = vec![0.0f64; class_count];
    for set in sets {
        for (c, &count) in set.counts().iter().enumerate() {
            pooled[c] += count as f64;
        }
    }
    let total: f64 = pooled.iter().sum();
    let uniform = 1.0 / class_count as f64;
    let pi: Vec<f64> = pooled
        .iter()
        .map(|&p| (1.0 - smoothing) * (p / total) + smoothing * uniform)
        .collect();
    let pi = ProbabilityVector::new(pi)?;
    let rho = TransitionMatrix::identity_smoothed(class_count, smoothing)?;
    Ok(MixtureParams::new(pi, rho, trials)?)
}

pub fn run(ctx: &CommandContext, labels_path: &Path, config_value: serde_json::Value) -> Result<()> {
    let started = Instant::now();
    let config = FitConfig::from_value(config_value)?;
    let sets = io::read_label_sets(labels_path)?;
    if sets.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: L = 0 label sets; need at least one row to fit",
            labels_path.display()
        )));
    }
    let class_count = sets[0].class_count();
    if class_count < 2 {
        return Err(CliError::Validation(format!(
            "label sets have {class_count} column(s); a mixture needs at least 2 classes"
        )));
    }
    let trials = sets[0].trials();
    if trials == 0 {
        return Err(CliError::Validation("label sets sum to zero trials".into()));
    }

    let init = default_init(&sets, class_count, trials, config.smoothing)?;
    let outcome = run_em(&sets, init, &config.priors(class_count)?, &config.em_config())?;
    if outcome.objective_trace.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("objective trace contains non-finite values".into()));
    }

    let result = FitResult {
        class_count,
        trials,
        set_count: sets.len(),
        pi: super::vector_json(outcome.params.pi()),
        rho: super::matrix_json(outcome.params.rho()),
        objective_trace: outcome.objective_trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        floored: outcome.floored,
    };
    io::write_json(&ctx.out_dir.join(RESULT_FILE), &result)?;

    let mut manifest = RunManifest::new(
        "fit",
        ctx.seed,
        serde_json::to_value(&config).expect("config serializes"),
    )
    .with_inputs(&[labels_path]);
    let bound = identifiability_bound(class_count);
    if trials < bound {
        manifest.warnings.push(format!(
            "trials per set {trials} is below the identifiability bound {bound} for \
             {class_count} classes; the fitted parameters are not unique"
        ));
    }
    manifest.record_artifact(RESULT_FILE);
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&ctx.out_dir)?;

    ctx.say(format!(
        "fit {} sets of {} trials over {} classes: {} iterations, converged = {}",
        result.set_count, trials, class_count, result.iterations, result.converged
    ));
    Ok(())
}
