//! Config ingestion, figure recipes, sweeps and file emission.

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;
pub mod sweeps;

pub use commands::{evolve_run, geff_scan, squeeze_run, steady_run, Model};
pub use config::{RunConfig, SweepAxis, Times};
pub use figures::{figure_config, run_figure, FigureId};
pub use output::{write_emission, CellStatus, Emission, RunManifest, Table};
pub use sweeps::{baseline_reservoir, sweep_systematic, sweep_thermal};
