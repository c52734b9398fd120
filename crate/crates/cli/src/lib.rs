//! Config-driven experiment runner and verification suites for `knudsen`.

pub mod audits;
pub mod config;
pub mod runner;
pub mod verify;

pub use audits::{aggregate, VerdictRecord};
pub use config::{ExperimentConfig, Overrides};
pub use runner::{resume, run_experiment, run_resolved, RunOptions, RunOutcome, RunReport};
pub use verify::{run_suite, Suite, SuiteParams};
