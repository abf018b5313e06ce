//! Declarative experiments: configs, seeded parallel runs, CSV and SVG output.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run_bertsekas, run_spiral, run_yu, ChainResult, Trajectory};
pub use output::{RunRecord, SummaryRecord};
pub use plot::{emit_plot, PlotSpec};
pub use runner::{request_cancel, run_single, run_sweep, sweep, Runner, SweepResult};

/// Environment variable that overrides the number of worker threads.
pub const WORKERS_ENV: &str = "ETD_LAB_WORKERS";
