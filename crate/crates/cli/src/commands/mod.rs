//! The experiment commands. Each command resolves its config, runs,
//! writes its artifacts plus exactly one manifest into the output
//! directory, and reports a one-line summary on stdout unless quiet.

pub mod clean;
pub mod demo;
pub mod fit;
pub mod rerun;
pub mod sweep;
pub mod synth;

use mixclean::{ProbabilityVector, TransitionMatrix};
use std::path::PathBuf;

/// Global flags shared by every command.
#[derive(Debug, Clone)]
pub struct CommandContext {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub quiet: bool,
}

impl CommandContext {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

/// Probability vector as a plain JSON array.
pub(crate) fn vector_json(v: &ProbabilityVector) -> Vec<f64> {
    v.values().to_vec()
}

/// Transition matrix as nested row-major arrays: entry [r][c] is
/// p(noisy = r | clean = c).
pub(crate) fn matrix_json(m: &TransitionMatrix) -> Vec<Vec<f64>> {
    let c = m.class_count();
    (0..c).map(|r| (0..c).map(|col| m.entry(r, col)).collect()).collect()
}
