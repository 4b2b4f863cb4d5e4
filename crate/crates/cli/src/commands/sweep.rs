//! Identifiability sweep: for every (class count, trials per set, set
//! count, repetition) cell, draw a random diagonally dominant ground
//! truth, sample label sets from it, fit from several initializations,
//! and record how well the truth is recovered and how much the
//! initializations disagree. Below the 2C−1 bound the fits scatter while
//! matching the data likelihood; at and above it they coincide with the
//! truth.

use super::CommandContext;
use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::RunManifest;
use mixclean::noise::NoisyLabelDistribution;
use mixclean::{
    identifiability_bound, mixture_log_likelihood, permutation_aligned_distance, rng, run_em,
    sample_label_sets, CountVector, MixtureParams, ProbabilityVector, TransitionMatrix,
};
use rand::RngExt;
use rayon::prelude::*;
use std::time::Instant;

pub const TABLE_FILE: &str = "sweep.csv";
pub const TABLE_HEADER: &str =
    "class_count,trials,label_sets,rep,bound,recovery_error,disagreement,holdout_gap";

#[derive(Debug, Clone, Copy)]
struct Cell {
    class_count: usize,
    trials: u64,
    label_sets: usize,
    rep: usize,
    stream: u64,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub class_count: usize,
    pub trials: u64,
    pub label_sets: usize,
    pub rep: usize,
    pub bound: u64,
    /// Aligned parameter distance between the best-objective fit and the
    /// generating truth.
    pub recovery_error: f64,
    /// Largest pairwise aligned distance among the fits from different
    /// initializations.
    pub disagreement: f64,
    /// Spread of mean held-out log-likelihood across initializations.
    pub holdout_gap: f64,
}

fn draw_simplex(rng: &mut rng::Stream, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Random mixture with every transition column diagonally dominant:
/// each column is an even blend of a random simplex point and the
/// matching one-hot, so the diagonal holds at least half the mass.
pub fn random_dominant_truth(
    rng: &mut rng::Stream,
    class_count: usize,
    trials: u64,
) -> Result<MixtureParams> {
    let raw = draw_simplex(rng, class_count);
    let uniform = 1.0 / class_count as f64;
    let pi: Vec<f64> = raw.iter().map(|p| 0.7 * p + 0.3 * uniform).collect();
    let mut columns = Vec::with_capacity(class_count);
    for c in 0..class_count {
        let base = draw_simplex(rng, class_count);
        let column: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(r, &b)| 0.5 * b + if r == c { 0.5 } else { 0.0 })
            .collect();
        columns.push(ProbabilityVector::new(column).map_err(CliError::from)?);
    }
    let pi = ProbabilityVector::new(pi).map_err(CliError::from)?;
    let rho = TransitionMatrix::from_columns(columns).map_err(CliError::from)?;
    MixtureParams::new(pi, rho, trials).map_err(CliError::from)
}

fn random_init(
    rng: &mut rng::Stream,
    class_count: usize,
    trials: u64,
) -> Result<MixtureParams> {
    random_dominant_truth(rng, class_count, trials)
}

fn mean_log_likelihood(params: &MixtureParams, sets: &[CountVector]) -> Result<f64> {
    let mut total = 0.0;
    for set in sets {
        total += mixture_log_likelihood(set, params).map_err(CliError::from)?;
    }
    Ok(total / sets.len() as f64)
}

fn run_cell(cell: Cell, config: &SweepConfig, seed: u64) -> Result<SweepRow> {
    let mut stream = rng::substream(seed, cell.stream);
    let truth = random_dominant_truth(&mut stream, cell.class_count, cell.trials)?;
    let as_mixture = NoisyLabelDistribution::mixture(vec![(1.0, truth.clone())])
        .map_err(CliError::from)?;
    let sets = sample_label_sets(&as_mixture, cell.trials, cell.label_sets, &mut stream)
        .map_err(CliError::from)?;
    let holdout = sample_label_sets(&as_mixture, cell.trials, config.holdout_sets, &mut stream)
        .map_err(CliError::from)?;

    let priors = config.em.priors(cell.class_count)?;
    let em_config = config.em.em_config();
    let mut fits = Vec::with_capacity(config.inits);
    for init_index in 0..config.inits {
        let init = if init_index == 0 {
            super::fit::default_init(&sets, cell.class_count, cell.trials, config.em.smoothing)?
        } else {
            random_init(&mut stream, cell.class_count, cell.trials)?
        };
        fits.push(run_em(&sets, init, &priors, &em_config).map_err(CliError::from)?);
    }

    let best = fits
        .iter()
        .max_by(|a, b| {
            let fa = a.objective_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
            let fb = b.objective_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
            fa.total_cmp(&fb)
        })
        .expect("at least one init");
    let recovery_error =
        permutation_aligned_distance(&best.params, &truth).map_err(CliError::from)?.0;

    let mut disagreement = 0.0f64;
    for i in 0..fits.len() {
        for j in (i + 1)..fits.len() {
            let (d, _) = permutation_aligned_distance(&fits[i].params, &fits[j].params)
                .map_err(CliError::from)?;
            disagreement = disagreement.max(d);
        }
    }

    let holdout_scores: Vec<f64> = fits
        .iter()
        .map(|fit| mean_log_likelihood(&fit.params, &holdout))
        .collect::<Result<_>>()?;
    let holdout_gap = holdout_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - holdout_scores.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(SweepRow {
        class_count: cell.class_count,
        trials: cell.trials,
        label_sets: cell.label_sets,
        rep: cell.rep,
        bound: identifiability_bound(cell.class_count),
        recovery_error,
        disagreement,
        holdout_gap,
    })
}

pub fn table_text(rows: &[SweepRow]) -> String {
    let mut text = String::from(TABLE_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.class_count,
            row.trials,
            row.label_sets,
            row.rep,
            row.bound,
            row.recovery_error,
            row.disagreement,
            row.holdout_gap
        ));
    }
    text
}

pub fn run(ctx: &CommandContext, config_value: serde_json::Value) -> Result<()> {
    let started = Instant::now();
    let config = SweepConfig::from_value(config_value)?;

    let mut cells = Vec::new();
    for &class_count in &config.class_counts {
        for &trials in &config.trial_grid {
            for &label_sets in &config.set_grid {
                for rep in 0..config.reps {
                    let stream = cells.len() as u64;
                    cells.push(Cell { class_count, trials, label_sets, rep, stream });
                }
            }
        }
    }

    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&cell| run_cell(cell, &config, ctx.seed))
        .collect::<Result<_>>()?;

    io::atomic_write(&ctx.out_dir.join(TABLE_FILE), table_text(&rows).as_bytes())?;

    let mut manifest = RunManifest::new(
        "identifiability-sweep",
        ctx.seed,
        serde_json::to_value(&config).expect("config serializes"),
    );
    manifest.record_artifact(TABLE_FILE);
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&ctx.out_dir)?;

    ctx.say(format!("{} sweep rows written to {TABLE_FILE}", rows.len()));
    Ok(())
}
