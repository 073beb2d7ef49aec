//! Experiment orchestration: runs, sweeps, logging and summary metrics.

mod config;
mod metrics;
mod output;
mod run;
mod sweep;

pub use config::{
    toy_config, ExperimentConfig, ExpressionSpec, MlpParams, MlpSpec, ProblemSpec, QuadraticSpec, StepperSpec,
    TOY_LOG_EVERY, TOY_LR, TOY_STEPS,
};
pub use metrics::relative_drop;
pub use output::{csv_header, format_float, trajectory_csv, write_atomic, write_json, write_trajectories};
pub use run::{
    run_experiment, run_experiment_with, run_single, LogRow, StepTrace, SummaryStats, Trajectory,
    CONVERGENCE_THRESHOLD, STALL_THRESHOLD,
};
pub use sweep::{sweep_c, sweep_c_trajectories, RunReport, SweepReport, SweepRow};
