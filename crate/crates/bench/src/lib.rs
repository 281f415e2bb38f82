//! Experiment plans, the trial runner, artifact verification and the `csc`
//! command line.

pub mod error;
pub mod plan;
pub mod plot;
pub mod runner;
pub mod solve;
pub mod table;
pub mod verify;

pub use error::{BenchError, Result};
pub use plan::{ExperimentPlan, PlanKind};
pub use runner::{execute, run_experiment, RunOutput};
pub use verify::{verify_dir, VerifyReport};
