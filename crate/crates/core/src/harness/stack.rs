//! Runs the main filter, the backup and the timing baseline over one
//! labeled stream in real-time order.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::Estimate;
use crate::baseline::{
    ssr_compare_and_reset, BackupEstimator, HeelStrikeConfig, HeelStrikeDetector, HeelStrikeLog,
    HeelStrikeSource, TimingEstimator, DEFAULT_RESET_RATIO,
};
use crate::error::Result;
use crate::estimator::{FilterState, NoiseConfig};
use crate::gait_model::{GaitState, ParameterMatrix};
use crate::simdata::LabeledStream;

/// Where the timing baseline and the backup get their heel strikes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeelStrikeMode {
    /// The stream's ground-truth flags, i.e. perfect detection.
    #[default]
    Oracle,
    /// The threshold detector run causally on the measurements.
    Detected,
}

/// Initial guess shared by the filter and the backup: standing at heel
/// strike with a typical cadence, stride of 1.4 leg lengths, level ground.
pub fn default_initial_state(leg_length: f64) -> GaitState {
    GaitState::new(0.0, 0.9, 1.4 * leg_length, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackOptions {
    pub noise: NoiseConfig,
    /// Whether the backup may reset the main filter.
    pub resets_enabled: bool,
    pub reset_ratio: f64,
    pub heelstrike_mode: HeelStrikeMode,
    pub heelstrike: HeelStrikeConfig,
    /// Initial main-filter state; defaults to [`default_initial_state`].
    pub initial: Option<GaitState>,
    pub measure_latency: bool,
}

impl StackOptions {
    pub fn new(noise: NoiseConfig) -> Self {
        Self {
            noise,
            resets_enabled: true,
            reset_ratio: DEFAULT_RESET_RATIO,
            heelstrike_mode: HeelStrikeMode::Oracle,
            heelstrike: HeelStrikeConfig::default(),
            initial: None,
            measure_latency: false,
        }
    }
}

/// Per-sample outputs of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct StackRun {
    pub ekf: Vec<Estimate>,
    pub tbe: Vec<Estimate>,
    pub backup: Vec<Estimate>,
    /// Sample indices at which the backup reset the main filter.
    pub resets: Vec<usize>,
    /// Sample indices of the backup's completed-stride comparisons.
    pub comparisons: Vec<usize>,
    pub heelstrikes: HeelStrikeLog,
    /// Wall-clock nanoseconds per sample for the whole stack, if measured.
    pub latencies_ns: Vec<u64>,
}

/// Step every estimator through `stream`.
///
/// At a heel-strike sample the backup first closes its stride and the two
/// stride SSRs are compared; a reset places the main filter at the current
/// heel strike, so its prediction step is skipped for that sample.
pub fn run_stack(stream: &LabeledStream, phi: &ParameterMatrix, opts: &StackOptions) -> Result<StackRun> {
    opts.noise.validate()?;
    let dt = stream.dt();
    let leg = stream.leg_length;
    let initial = opts.initial.unwrap_or_else(|| default_initial_state(leg));
    let mut fs = FilterState::new(&initial, leg, dt, &opts.noise);
    let mut backup = BackupEstimator::new(&initial, leg, dt, &opts.noise);
    let mut tbe = TimingEstimator::new();
    let mut detector = HeelStrikeDetector::new(opts.heelstrike, stream.sample_rate);
    let mut ekf_ssr = 0.0;

    let n = stream.len();
    let mut run = StackRun {
        ekf: Vec::with_capacity(n),
        tbe: Vec::with_capacity(n),
        backup: Vec::with_capacity(n),
        resets: Vec::new(),
        comparisons: Vec::new(),
        heelstrikes: HeelStrikeLog {
            timestamps: Vec::new(),
            source: match opts.heelstrike_mode {
                HeelStrikeMode::Oracle => HeelStrikeSource::GroundTruth,
                HeelStrikeMode::Detected => HeelStrikeSource::ThresholdDetected,
            },
        },
        latencies_ns: Vec::with_capacity(if opts.measure_latency { n } else { 0 }),
    };

    for (i, sample) in stream.samples.iter().enumerate() {
        let started = opts.measure_latency.then(Instant::now);
        let t = sample.time;
        let z = &sample.z;
        let heel_strike = match opts.heelstrike_mode {
            HeelStrikeMode::Oracle => sample.heel_strike,
            HeelStrikeMode::Detected => detector.step(t, z),
        };

        let mut reset = false;
        if heel_strike {
            run.heelstrikes.timestamps.push(t);
            tbe.on_heelstrike(t);
            if let Some(backup_ssr) = backup.on_heelstrike(t) {
                run.comparisons.push(i);
                if opts.resets_enabled {
                    reset = ssr_compare_and_reset(
                        &mut ekf_ssr,
                        backup_ssr,
                        &mut fs,
                        &backup,
                        opts.reset_ratio,
                        &opts.noise,
                    );
                } else {
                    ekf_ssr = 0.0;
                }
            } else {
                ekf_ssr = 0.0;
            }
        }
        if reset {
            run.resets.push(i);
        } else {
            fs.predict(&opts.noise);
        }
        ekf_ssr += fs.update(z, phi, &opts.noise)?.ssr_increment;
        backup.step(t, z, phi, &opts.noise)?;

        if let Some(s) = started {
            run.latencies_ns.push(s.elapsed().as_nanos() as u64);
        }

        run.ekf.push(fs.gait_state().into());
        run.backup.push(backup.gait_state().into());
        run.tbe.push(Estimate {
            phase: tbe.phase(t).unwrap_or(0.0),
            phase_rate: tbe.phase_rate().unwrap_or(0.0),
            stride_length: None,
            incline: None,
        });
    }
    Ok(run)
}

/// Nearest-rank percentile of a set of latencies, `q` in `[0, 1]`.
pub fn percentile(values: &[u64], q: f64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.5), 50);
        assert_eq!(percentile(&v, 0.99), 99);
        assert_eq!(percentile(&v, 1.0), 100);
        assert_eq!(percentile(&[], 0.5), 0);
    }
}
