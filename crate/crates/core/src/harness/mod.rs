//! Synthetic samplers, isometry-defect diagnostics and configuration-driven
//! convergence experiments.

mod defect;
mod experiment;
mod sample;

pub use defect::{covering_radius, isometry_defect, metric_defect, IsometryDefect};
pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentResult, ExperimentSolver, SizeSummary, Summary,
    TrialRow, CSV_COLUMNS,
};
pub use sample::{sample, Generator, DEFAULT_GRID_RESOLUTION};
