//! Experiment drivers, metrics and statistics.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod stack;
pub mod stats;

pub use metrics::{mean_metrics, phase_error, stride_metrics, Estimate, MetricMeans, StrideErrors};
pub use stack::{default_initial_state, percentile, run_stack, HeelStrikeMode, StackOptions, StackRun};
pub use stats::{paired_ttest, Degeneracy, PairedTTest};
pub use config::{derive_seed, ExperimentConfig, Mode, NoisePreset, ScenarioConfig, ScenarioKind};
pub use experiment::{
    run_ablation, run_crossval, run_fit, run_gen, run_replay, AblationOutcome, CrossvalOutcome, FitOutcome,
    GenOutcome, ReplayOutcome,
};
pub use report::{reaggregate, AggregateReport, StrideRow, Summary};
