//! Stride-wise error metrics against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_model::GaitState;
use crate::simdata::LabeledStream;
use crate::torque_model::{evaluate_torque, TorqueSurface};

/// One estimator's output at one sample. Estimators that do not track
/// stride length or incline leave them empty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub phase: f64,
    pub phase_rate: f64,
    pub stride_length: Option<f64>,
    pub incline: Option<f64>,
}

impl From<GaitState> for Estimate {
    fn from(g: GaitState) -> Self {
        Self {
            phase: g.phase,
            phase_rate: g.phase_rate,
            stride_length: Some(g.stride_length),
            incline: Some(g.incline),
        }
    }
}

/// Signed phase difference wrapped to `[-0.5, 0.5)`.
pub fn phase_error(est: f64, truth: f64) -> f64 {
    (est - truth + 0.5).rem_euclid(1.0) - 0.5
}

/// Root-mean-square errors over one stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideErrors {
    pub stride: usize,
    /// Seconds.
    pub start_time: f64,
    /// Percent of the gait cycle.
    pub phase_pct: f64,
    /// 1/s.
    pub phase_rate: f64,
    /// Meters.
    pub stride_length: Option<f64>,
    /// Degrees.
    pub incline: Option<f64>,
    /// Desired torque, N·m.
    pub torque: Option<f64>,
}

struct Accumulator {
    n: usize,
    sums: [f64; 5],
    has: [bool; 3],
}

impl Accumulator {
    fn new() -> Self {
        Self {
            n: 0,
            sums: [0.0; 5],
            has: [true; 3],
        }
    }

    fn rms(&self, i: usize) -> f64 {
        (self.sums[i] / self.n as f64).sqrt()
    }
}

/// Per-stride RMSEs of `estimates` against the stream's ground truth,
/// with heel-strike flags as stride boundaries. Only complete strides
/// (from one flag up to the next) are scored.
pub fn stride_metrics(
    stream: &LabeledStream,
    estimates: &[Estimate],
    torque: Option<&TorqueSurface>,
) -> Result<Vec<StrideErrors>> {
    if stream.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            what: "stream samples vs estimates",
            left: stream.len(),
            right: estimates.len(),
        });
    }
    let hs = stream.heel_strike_indices();
    let leg = stream.leg_length;
    let mut out = Vec::with_capacity(hs.len().saturating_sub(1));
    for (k, w) in hs.windows(2).enumerate() {
        let mut acc = Accumulator::new();
        for i in w[0]..w[1] {
            let truth = &stream.samples[i].truth;
            let e = &estimates[i];
            acc.n += 1;
            acc.sums[0] += (100.0 * phase_error(e.phase, truth.phase)).powi(2);
            acc.sums[1] += (e.phase_rate - truth.phase_rate).powi(2);
            match e.stride_length {
                Some(l) => acc.sums[2] += (l - truth.stride_length).powi(2),
                None => acc.has[0] = false,
            }
            match e.incline {
                Some(r) => acc.sums[3] += (r - truth.incline).powi(2),
                None => acc.has[1] = false,
            }
            match (torque, e.stride_length, e.incline) {
                (Some(surface), Some(l), Some(r)) => {
                    let est = GaitState {
                        phase: e.phase,
                        phase_rate: e.phase_rate,
                        stride_length: l,
                        incline: r,
                    };
                    let d = evaluate_torque(surface, &est, leg) - evaluate_torque(surface, truth, leg);
                    acc.sums[4] += d * d;
                }
                _ => acc.has[2] = false,
            }
        }
        out.push(StrideErrors {
            stride: k,
            start_time: stream.samples[w[0]].time,
            phase_pct: acc.rms(0),
            phase_rate: acc.rms(1),
            stride_length: acc.has[0].then(|| acc.rms(2)),
            incline: acc.has[1].then(|| acc.rms(3)),
            torque: acc.has[2].then(|| acc.rms(4)),
        });
    }
    Ok(out)
}

/// Mean of each metric over a set of strides.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub strides: usize,
    pub phase_pct: f64,
    pub phase_rate: f64,
    pub stride_length: Option<f64>,
    pub incline: Option<f64>,
    pub torque: Option<f64>,
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut n = 0usize;
    let mut s = 0.0;
    for v in values {
        s += v?;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

pub fn mean_metrics(strides: &[StrideErrors]) -> MetricMeans {
    let n = strides.len();
    if n == 0 {
        return MetricMeans::default();
    }
    let nf = n as f64;
    MetricMeans {
        strides: n,
        phase_pct: strides.iter().map(|s| s.phase_pct).sum::<f64>() / nf,
        phase_rate: strides.iter().map(|s| s.phase_rate).sum::<f64>() / nf,
        stride_length: mean_opt(strides.iter().map(|s| s.stride_length)),
        incline: mean_opt(strides.iter().map(|s| s.incline)),
        torque: mean_opt(strides.iter().map(|s| s.torque)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::MeasurementVector;
    use crate::simdata::StreamSample;

    #[test]
    fn wrapped_phase_error() {
        assert!((phase_error(0.99, 0.01) + 0.02).abs() < 1e-12);
        assert_eq!(phase_error(0.4, 0.4), 0.0);
        assert_eq!(phase_error(0.25, 0.75), -0.5);
    }

    fn stream(n: usize, period: usize) -> LabeledStream {
        let samples = (0..n)
            .map(|i| StreamSample {
                time: i as f64 * 0.01,
                z: MeasurementVector::default(),
                truth: GaitState::new((i % period) as f64 / period as f64, 1.0, 1.2, 2.0),
                heel_strike: i % period == 0,
            })
            .collect();
        LabeledStream {
            sample_rate: 100.0,
            leg_length: 0.9,
            samples,
        }
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let s = stream(350, 100);
        let est: Vec<Estimate> = s.samples.iter().map(|x| x.truth.into()).collect();
        let m = stride_metrics(&s, &est, None).unwrap();
        assert_eq!(m.len(), 3);
        for e in &m {
            assert_eq!(e.phase_pct, 0.0);
            assert_eq!(e.stride_length, Some(0.0));
            assert_eq!(e.torque, None);
        }
    }

    #[test]
    fn constant_offset_is_percent() {
        let s = stream(200, 100);
        let est: Vec<Estimate> = s
            .samples
            .iter()
            .map(|x| Estimate {
                phase: crate::gait_model::wrap_phase(x.truth.phase + 0.02),
                phase_rate: 1.0,
                stride_length: None,
                incline: None,
            })
            .collect();
        let m = stride_metrics(&s, &est, None).unwrap();
        assert!((m[0].phase_pct - 2.0).abs() < 1e-9);
        assert_eq!(m[0].incline, None);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let s = stream(10, 5);
        assert!(stride_metrics(&s, &[Estimate::default(); 3], None).is_err());
    }
}
