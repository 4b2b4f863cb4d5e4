//! Re-execute a command from its manifest: same command, same resolved
//! config, same seed. Inputs are resolved exactly as recorded, so a
//! rerun from the original working directory reproduces every artifact
//! byte-for-byte.

use super::CommandContext;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use std::path::{Path, PathBuf};

pub fn run(ctx: &CommandContext, manifest_path: &Path) -> Result<()> {
    let manifest = RunManifest::read(manifest_path)?;
    let ctx = CommandContext {
        seed: manifest.seed,
        out_dir: ctx.out_dir.clone(),
        quiet: ctx.quiet,
    };
    let first_input = manifest.inputs.first().map(PathBuf::from);
    match manifest.command.as_str() {
        "demo-nonidentifiability" => super::demo::run(&ctx),
        "fit" => {
            let labels = first_input.ok_or_else(|| {
                CliError::Validation("fit manifest lists no input file".into())
            })?;
            super::fit::run(&ctx, &labels, manifest.config)
        }
        "identifiability-sweep" => super::sweep::run(&ctx, manifest.config),
        "clean" => {
            let data_dir = first_input.ok_or_else(|| {
                CliError::Validation("clean manifest lists no dataset directory".into())
            })?;
            super::clean::run(&ctx, &data_dir, manifest.config)
        }
        "make-synthetic" => super::synth::run(&ctx, manifest.config),
        other => Err(CliError::Validation(format!(
            "manifest names unknown command {other:?}"
        ))),
    }
}
