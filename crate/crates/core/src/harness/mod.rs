//! Config-driven experiment sweeps: regression data, training and
//! approximation runs, result tables, slope fits and plots.

mod config;
mod dataset;
mod plot;
mod slope;
mod sweep;
mod table;

pub use config::{ExperimentConfig, Mode};
pub use dataset::generate_dataset;
pub use plot::{emit_outputs, render_svg, OutputFormats};
pub use slope::{fit_slope, Column, SlopeFit};
pub use sweep::{run_sweep, run_sweep_with, workers_from_env, WORKERS_ENV};
pub use table::{ResultRow, ResultTable, CSV_HEADER};
