//! Random-system generation, H∞ error estimates, and the experiment driver
//! behind the command-line tool.

pub mod config;
pub mod experiment;
pub mod hinf;
pub mod random;
pub mod sweep;

pub use config::{ExperimentConfig, Mode};
pub use experiment::{run_experiment, ExperimentReport};
pub use hinf::{hinf_norm, HinfEstimate, HinfEstimator, StateSpace, TransferEvaluator};
pub use random::{random_system, Sampler};
pub use sweep::{base_time_sweep, SweepReport};
