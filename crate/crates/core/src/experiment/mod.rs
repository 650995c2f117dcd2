//! Experiment driver: configuration, seed-parallel runs, sweeps and the
//! CSV/JSON artifacts.

mod config;
mod run;
mod sweep;

pub use config::{ExperimentConfig, Overrides, RosterEntry, SweepKind};
pub use run::{
    build_world, evaluation_times, run_experiment, run_seed, spot_check, write_artifacts, ExperimentOutcome, RawRun,
    CSV_HEADER,
};
pub use sweep::{sweep_agents, sweep_heterogeneity, AgentSweepRow, HeterogeneityRow};
