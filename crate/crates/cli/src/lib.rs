//! Scenarios, experiment drivers and report emission for the planners in
//! `uge_core`.

pub mod app;
pub mod error;
pub mod experiment;
pub mod report;
pub mod scenario;

pub use error::{BenchError, Result};
pub use experiment::{run_experiment, run_mpc_experiment, run_to_experiment, AggregateStats, TrialRecord, TrialResult};
pub use scenario::{preset, presets, ScenarioKind, ScenarioSpec};
