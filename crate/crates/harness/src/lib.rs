//! Experiment orchestration: plan expansion, calibration, prediction,
//! simulation, comparison rows, reports, and plots.

pub mod plan;
pub mod plot;
pub mod report;
pub mod runner;

pub use plan::{ExperimentPlan, PlanPoint, Regime};
pub use report::ComparisonRow;
pub use runner::{run_plan, PlanOutcome, RunnerConfig};
