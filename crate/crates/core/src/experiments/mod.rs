//! Experiment runners and their reproducible records.
//!
//! Every runner takes its config and returns a [`RunRecord`] holding the
//! full config, a per-step loss trace, scalar metrics, a sweep table and a
//! list of named checks. Replicates draw their seeds from
//! [`crate::rng::derive_seed`] and run on the rayon pool; results are
//! collected in replicate order, so the record does not depend on the
//! number of threads.

mod boundedness;
mod config;
mod diagnostics;
mod duals;
mod equivalence;
mod kernel_approx;
mod kernel_learning;
mod memorize;
mod record;

pub use boundedness::run_boundedness;
pub use config::{
    BoundednessConfig, DiagnosticsConfig, DualsConfig, EquivalenceConfig, ExperimentConfig, KernelApproxConfig,
    KernelLearningConfig, MemorizeConfig,
};
pub use diagnostics::run_diagnostics;
pub use duals::run_duals;
pub use equivalence::run_equivalence;
pub use kernel_approx::run_kernel_approx;
pub use kernel_learning::run_kernel_learning;
pub use memorize::{memorization_steps, memorization_width, run_memorization, witness_width};
pub use record::{Cell, Check, RunRecord, SweepTable};

use std::time::Instant;

use crate::Result;

/// Runs the experiment described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let mut record = match config {
        ExperimentConfig::Duals(c) => run_duals(c),
        ExperimentConfig::KernelApprox(c) => run_kernel_approx(c),
        ExperimentConfig::Equivalence(c) => run_equivalence(c),
        ExperimentConfig::KernelLearning(c) => run_kernel_learning(c),
        ExperimentConfig::Memorize(c) => run_memorization(c),
        ExperimentConfig::Boundedness(c) => run_boundedness(c),
        ExperimentConfig::Diagnostics(c) => run_diagnostics(c),
    }?;
    record.wall_clock_secs = start.elapsed().as_secs_f64();
    record.validate()?;
    Ok(record)
}
