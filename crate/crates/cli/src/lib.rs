//! Experiment orchestration for the `mdev` binary: configuration, seeded
//! bound-comparison runs, CSV and JSON output, and plot scripts.

pub mod config;
pub mod plots;
pub mod run;

pub use config::ExperimentConfig;
pub use plots::{emit_plots, PlotOutput};
pub use run::{run_experiment, RunOutcome, Sidecar};

/// Worker count when neither the flag nor the environment sets one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
