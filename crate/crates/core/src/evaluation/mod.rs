//! Split sampling, the experiment harness and metrics.

mod harness;
mod metrics;
pub mod reference;
pub mod report;
mod split;

pub use harness::{conformal_instance, permutation_roles, permutation_seed, run_experiment, Dataset, ExperimentResult, FitRecord, Method};
pub use metrics::{per_time_breakdown, InstanceResult, MetricsReport, Summary, TimePoint, WindowCounts};
pub use split::{apportion, sample_split, Regime, RegimeSpec};
