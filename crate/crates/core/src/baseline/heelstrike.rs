//! Threshold heel-strike detector on foot angular velocity and heel height.
//!
//! An event fires when the foot angular velocity falls through
//! `velocity_threshold` after having risen above `arm_threshold` (the foot
//! swinging toe-up before contact), while the smoothed heel height is below
//! `height_threshold`, and at least `refractory` seconds after the last event.

use serde::{Deserialize, Serialize};

use crate::estimator::MeasurementVector;
use crate::error::{Error, Result};
use crate::simdata::LabeledStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeelStrikeConfig {
    /// deg/s; the downward crossing that marks contact.
    pub velocity_threshold: f64,
    /// deg/s; the velocity must exceed this between events.
    pub arm_threshold: f64,
    /// Meters.
    pub height_threshold: f64,
    /// Time constant of the heel-height low-pass, seconds.
    pub height_smoothing: f64,
    /// Seconds.
    pub refractory: f64,
}

impl Default for HeelStrikeConfig {
    fn default() -> Self {
        Self {
            velocity_threshold: 0.0,
            arm_threshold: 40.0,
            height_threshold: 0.1,
            height_smoothing: 0.02,
            refractory: 0.3,
        }
    }
}

impl HeelStrikeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arm_threshold > self.velocity_threshold) {
            return Err(Error::Config(
                "heel-strike arm threshold must exceed the velocity threshold".into(),
            ));
        }
        if !(self.refractory > 0.0) || !(self.height_smoothing >= 0.0) {
            return Err(Error::Config(
                "heel-strike refractory must be positive and smoothing non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeelStrikeSource {
    GroundTruth,
    ThresholdDetected,
}

/// Heel-strike times, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HeelStrikeLog {
    pub timestamps: Vec<f64>,
    pub source: HeelStrikeSource,
}

impl HeelStrikeLog {
    /// Heel strikes flagged in a labeled stream.
    pub fn from_ground_truth(stream: &LabeledStream) -> Self {
        Self {
            timestamps: stream
                .samples
                .iter()
                .filter(|s| s.heel_strike)
                .map(|s| s.time)
                .collect(),
            source: HeelStrikeSource::GroundTruth,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Causal, sample-by-sample detector.
#[derive(Debug, Clone)]
pub struct HeelStrikeDetector {
    config: HeelStrikeConfig,
    dt: f64,
    armed: bool,
    prev_velocity: Option<f64>,
    height: Option<f64>,
    last_event: Option<f64>,
}

impl HeelStrikeDetector {
    pub fn new(config: HeelStrikeConfig, sample_rate: f64) -> Self {
        Self {
            config,
            dt: 1.0 / sample_rate,
            armed: false,
            prev_velocity: None,
            height: None,
            last_event: None,
        }
    }

    /// Feed one sample at time `t`; returns true on a heel strike.
    pub fn step(&mut self, t: f64, z: &MeasurementVector) -> bool {
        let c = &self.config;
        let alpha = if c.height_smoothing > 0.0 {
            self.dt / (c.height_smoothing + self.dt)
        } else {
            1.0
        };
        let h = match self.height {
            Some(h) => h + alpha * (z.p_u - h),
            None => z.p_u,
        };
        self.height = Some(h);

        let v = z.theta_f_dot;
        if v > c.arm_threshold {
            self.armed = true;
        }
        let crossed = matches!(self.prev_velocity, Some(prev) if prev > c.velocity_threshold)
            && v <= c.velocity_threshold;
        self.prev_velocity = Some(v);

        let rested = self.last_event.is_none_or(|last| t - last > c.refractory);
        if crossed && self.armed && rested && h < c.height_threshold {
            self.armed = false;
            self.last_event = Some(t);
            return true;
        }
        false
    }
}

/// Run the detector over a uniformly sampled measurement sequence
/// starting at time zero.
pub fn detect_heelstrike(
    stream: &[MeasurementVector],
    sample_rate: f64,
    config: &HeelStrikeConfig,
) -> HeelStrikeLog {
    let mut det = HeelStrikeDetector::new(*config, sample_rate);
    let timestamps = stream
        .iter()
        .enumerate()
        .filter_map(|(i, z)| {
            let t = i as f64 / sample_rate;
            det.step(t, z).then_some(t)
        })
        .collect();
    HeelStrikeLog {
        timestamps,
        source: HeelStrikeSource::ThresholdDetected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_velocity(v: f64) -> MeasurementVector {
        MeasurementVector {
            theta_f_dot: v,
            ..MeasurementVector::default()
        }
    }

    #[test]
    fn standing_still_has_no_events() {
        let stream = vec![with_velocity(0.0); 1000];
        assert!(detect_heelstrike(&stream, 100.0, &HeelStrikeConfig::default()).is_empty());
    }

    #[test]
    fn refractory_merges_close_crossings() {
        // swing up, cross down, swing up again and cross down 0.1 s later
        let mut stream = Vec::new();
        for v in [100.0, 100.0, -50.0, -50.0, -50.0, -50.0, 100.0, 100.0, 100.0, 100.0, -50.0] {
            stream.push(with_velocity(v));
        }
        stream.extend(vec![with_velocity(-50.0); 50]);
        let log = detect_heelstrike(&stream, 50.0, &HeelStrikeConfig::default());
        assert_eq!(log.timestamps, vec![2.0 / 50.0]);
    }

    #[test]
    fn raised_heel_blocks_event() {
        let mut stream = vec![with_velocity(100.0); 5];
        stream.extend(vec![
            MeasurementVector {
                theta_f_dot: -10.0,
                p_u: 0.5,
                ..MeasurementVector::default()
            };
            5
        ]);
        let cfg = HeelStrikeConfig {
            height_smoothing: 0.0,
            ..HeelStrikeConfig::default()
        };
        assert!(detect_heelstrike(&stream, 100.0, &cfg).is_empty());
    }

    #[test]
    fn unarmed_crossing_is_ignored() {
        let stream: Vec<_> = [10.0, -10.0, 10.0, -10.0].iter().map(|v| with_velocity(*v)).collect();
        assert!(detect_heelstrike(&stream, 100.0, &HeelStrikeConfig::default()).is_empty());
    }
}
