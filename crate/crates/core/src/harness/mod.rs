//! Experiment harness: configuration, coefficient presets, error-metric
//! sweeps over (eps, t, zeta), rate fitting, and reporting.

pub mod config;
pub mod problem;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, PRESETS};
pub use problem::{build_problem, layered_means, Problem};
pub use report::{
    constants_report, read_csv, to_csv, write_csv, write_json, write_svg_plots, ConstantsReport,
    CSV_COLUMNS,
};
pub use sweep::{
    fit_rate, run_sweep, run_sweep_with_problem, semigroup_grad_error_norm, uniformity_check,
    RateFit, ResultRecord, SweepOutput, Uniformity, Variable, ELLIPTIC_METRICS,
    PARABOLIC_METRICS,
};
