//! Generate a synthetic dataset: Gaussian clusters with one class per
//! center, plus injected label noise, in the directory layout `clean`
//! consumes.

use super::CommandContext;
use crate::config::SynthConfig;
use crate::error::Result;
use crate::io;
use crate::manifest::RunManifest;
use mixclean::{generate, inject_noise};
use std::time::Instant;

pub const FEATURES_FILE: &str = "features.csv";
pub const CLEAN_LABELS_FILE: &str = "true_labels.csv";
pub const NOISY_LABELS_FILE: &str = "noisy_labels.csv";

pub fn run(ctx: &CommandContext, config_value: serde_json::Value) -> Result<()> {
    let started = Instant::now();
    let config = SynthConfig::from_value(config_value)?;
    let spec = config.generator_spec(ctx.seed)?;
    let (features, labels) = generate(&spec);
    let noise = config.noise_spec(ctx.seed)?;
    let noisy = inject_noise(&labels, &features, &noise)?;

    let feature_rows: Vec<Vec<f64>> =
        (0..features.rows()).map(|i| features.row(i).to_vec()).collect();
    io::write_float_matrix(&ctx.out_dir.join(FEATURES_FILE), &feature_rows)?;
    io::write_labels(&ctx.out_dir.join(CLEAN_LABELS_FILE), &labels)?;
    io::write_labels(&ctx.out_dir.join(NOISY_LABELS_FILE), &noisy)?;

    let mut manifest = RunManifest::new(
        "make-synthetic",
        ctx.seed,
        serde_json::to_value(&config).expect("config serializes"),
    );
    manifest.record_artifact(FEATURES_FILE);
    manifest.record_artifact(CLEAN_LABELS_FILE);
    manifest.record_artifact(NOISY_LABELS_FILE);
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&ctx.out_dir)?;

    let flips = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count();
    ctx.say(format!(
        "{} samples, {} classes, {} labels flipped",
        labels.len(),
        config.class_count,
        flips
    ));
    Ok(())
}
