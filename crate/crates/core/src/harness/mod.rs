//! Experiment harness: configs, the seeded trial runner, aggregation and
//! CSV/SVG output.

mod aggregate;
mod canned;
mod config;
mod output;
mod runner;
mod svg;

pub use aggregate::{aggregate, summarize, Band, Summary};
pub use canned::{
    ablate_lambda, canned_figure, discrete_lambda, discrete_panel, run_ablation, run_figure,
    CannedFigure, CannedPanel, CannedRun, BRANIN_ABLATION_GRID, DISCRETE_ABLATION_GRID, FIGURE_IDS,
    PARKINSONS_FEATURES, PARKINSONS_LABEL, SUPERNOVA_FEATURES, SUPERNOVA_LABEL,
};
pub use config::{ArrivalSpec, ExperimentConfig, GpSettings, PolicySpec, TaskSpec};
pub use output::{
    ablation_rows, emit_ablation, emit_comparison, emit_outputs, AblationRow, ROUNDS_HEADER,
    SUMMARY_HEADER,
};
pub use runner::{
    half_cell, run_experiment, run_experiment_with, run_trial, run_trial_with_truth, thread_limit,
    Execution, ExperimentResults, TrialFailure, TrialResult, TrialRound, THREADS_ENV,
};
pub use svg::{band_chart, Series};
