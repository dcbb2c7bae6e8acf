//! Experiment harness for `mbd-core`: JSON run configs, seeded runs with
//! per-seed traces and an aggregate summary, demonstration generation, and
//! an IDX reader for MNIST-style data.

pub mod config;
pub mod error;
pub mod idx;
pub mod plot;
pub mod problems;
pub mod runner;

pub use config::{Method, RunConfig};
pub use error::{BenchError, IdxError};
pub use runner::{run_experiment, run_seed, Aggregate, SeedSummary};
