//! Metrics, ground-truth matching and the benchmark experiment harness.

mod experiment;
mod matching;
mod metrics;

pub use experiment::{
    quantile, run_experiment1, run_experiment2, summarize_experiment2, ExperimentRecord,
    SnrSummary, DEFAULT_SNRS,
};
pub use matching::{match_modes, optimal_assignment, MatchResult};
pub use metrics::{output_snr, relative_l2};
