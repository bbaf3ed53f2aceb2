//! Monte Carlo experiment harness: configuration, execution, aggregation
//! and the files a run leaves behind.

pub mod aggregate;
pub mod config;
pub mod figures;
pub mod output;
pub mod run;

pub use aggregate::{aggregate, Aggregate};
pub use config::{ExperimentConfig, OutputFormat, Scheme};
pub use output::{load_results, write_results, LoadedRun};
pub use run::{run_experiment, run_experiment_with_jobs, ExperimentOutput, ResultRecord, RunStats};
