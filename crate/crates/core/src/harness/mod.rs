//! Experiment plumbing: configuration files, run directories, sweeps,
//! summaries, plots and the self-test suite.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod selftest;
pub mod sweep;

pub use config::{Algorithm, ExperimentConfig, RunConfig};
pub use run::{execute_run, Checkpoint, FinalMetrics, RunSummary};
pub use sweep::{sweep, SweepSpec};
