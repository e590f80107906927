//! Config-driven experiment runner: seeding, pipelines, metrics and sweeps.

pub mod config;
pub mod run;
pub mod seeds;
pub mod sweep;

pub use config::{Experiment, ExperimentConfig, LearnerParams, SampleSizes};
pub use run::{load_config, run_experiment, Metrics, MetricsRecord, Overrides};
pub use seeds::SeedStreams;
pub use sweep::{run_sweep, SweepConfig, SweepReport};
