//! Two distinct (prior, transition) factorizations with identical
//! observable noisy-label marginals, written out as a report. Succeeds
//! only when the marginals agree to 1e-12, i.e. when the demonstration
//! actually demonstrates.

use super::{matrix_json, vector_json, CommandContext};
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::RunManifest;
use mixclean::nonidentifiability_demo;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const REPORT_FILE: &str = "nonidentifiability.json";
pub const GAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Serialize, Deserialize)]
pub struct Factorization {
    pub prior: Vec<f64>,
    /// Row-major; entry [r][c] is p(noisy = r | clean = c).
    pub transition: Vec<Vec<f64>>,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DemoReport {
    pub first: Factorization,
    pub second: Factorization,
    /// ℓ∞ distance between the two marginals.
    pub marginal_gap: f64,
    /// Permutation-aligned distance between the factorizations: they
    /// differ as parameters even though the marginals coincide.
    pub parameter_distance: f64,
}

pub fn run(ctx: &CommandContext) -> Result<()> {
    let started = Instant::now();
    let demo = nonidentifiability_demo();
    let report = DemoReport {
        first: Factorization {
            prior: vector_json(&demo.first_prior),
            transition: matrix_json(&demo.first_transition),
            marginal: vector_json(&demo.first_marginal),
        },
        second: Factorization {
            prior: vector_json(&demo.second_prior),
            transition: matrix_json(&demo.second_transition),
            marginal: vector_json(&demo.second_marginal),
        },
        marginal_gap: demo.marginal_gap,
        parameter_distance: demo.parameter_distance,
    };
    io::write_json(&ctx.out_dir.join(REPORT_FILE), &report)?;

    let mut manifest =
        RunManifest::new("demo-nonidentifiability", ctx.seed, serde_json::json!({}));
    manifest.record_artifact(REPORT_FILE);
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&ctx.out_dir)?;

    if report.marginal_gap >= GAP_TOLERANCE {
        return Err(CliError::Numerical(format!(
            "marginal gap {} is not below {GAP_TOLERANCE}",
            report.marginal_gap
        )));
    }
    ctx.say(format!(
        "two factorizations, marginal gap {:.2e}, parameter distance {:.3}",
        report.marginal_gap, report.parameter_distance
    ));
    Ok(())
}
