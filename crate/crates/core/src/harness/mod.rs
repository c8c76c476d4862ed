//! Scenario generation, the end-to-end pipeline and seeded sweeps.

pub mod config;
pub mod pipeline;
pub mod scenario;
pub mod sweep;
pub mod validate;

pub use config::{ChannelConfig, ConfigFile, ScenarioConfig, SweepRanges};
pub use pipeline::{run_pipeline, run_pipeline_traced, tree_dump, PipelineConfig, PipelineOutcome};
pub use scenario::{generate_scenario, Scenario};
pub use sweep::{run_sweep, run_trial, Aggregate, Stat, SweepResult, SweepRow, CSV_HEADER};
pub use validate::{validate_against_oracles, SeedReport, ValidationReport};
