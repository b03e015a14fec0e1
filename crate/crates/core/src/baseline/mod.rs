//! Timing-based baseline, heel-strike detection and the backup estimator.

pub mod backup;
pub mod heelstrike;
pub mod tbe;

pub use backup::{ssr_compare_and_reset, BackupEstimator, DEFAULT_RESET_RATIO};
pub use heelstrike::{
    detect_heelstrike, HeelStrikeConfig, HeelStrikeDetector, HeelStrikeLog, HeelStrikeSource,
};
pub use tbe::{tbe_phase, TimingEstimator};
