//! Timing-based phase estimation: time since the last heel strike divided
//! by the previous stride period.

use super::HeelStrikeLog;

/// Largest phase the estimator reports; it never reaches 1.
pub const PHASE_CEILING: f64 = 1.0 - f64::EPSILON;

/// Online timing-based estimator driven by heel-strike events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingEstimator {
    last: Option<f64>,
    period: Option<f64>,
}

impl TimingEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_heelstrike(&mut self, t: f64) {
        if let Some(last) = self.last {
            self.period = Some(t - last);
        }
        self.last = Some(t);
    }

    /// Previous stride period, once two heel strikes have been seen.
    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn phase_rate(&self) -> Option<f64> {
        self.period.map(|p| 1.0 / p)
    }

    /// Phase at time `t`, or `None` before the second heel strike.
    pub fn phase(&self, t: f64) -> Option<f64> {
        match (self.last, self.period) {
            (Some(last), Some(period)) => Some(((t - last) / period).clamp(0.0, PHASE_CEILING)),
            _ => None,
        }
    }
}

/// Timing-based phase at `t` from a complete heel-strike log.
///
/// Returns `None` until two heel strikes precede `t`.
pub fn tbe_phase(t: f64, log: &HeelStrikeLog) -> Option<f64> {
    let ts = &log.timestamps;
    let k = ts.partition_point(|&h| h <= t);
    if k < 2 {
        return None;
    }
    let last = ts[k - 1];
    let period = last - ts[k - 2];
    Some(((t - last) / period).clamp(0.0, PHASE_CEILING))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::HeelStrikeSource;

    fn log(ts: &[f64]) -> HeelStrikeLog {
        HeelStrikeLog {
            timestamps: ts.to_vec(),
            source: HeelStrikeSource::GroundTruth,
        }
    }

    #[test]
    fn half_period_is_half_phase() {
        let l = log(&[0.0, 1.1, 2.2]);
        assert!((tbe_phase(2.2 + 0.55, &l).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_before_two_events() {
        assert_eq!(tbe_phase(0.5, &log(&[0.0])), None);
        assert_eq!(tbe_phase(0.5, &log(&[0.0, 1.0])), None);
        assert_eq!(TimingEstimator::new().phase(1.0), None);
    }

    #[test]
    fn slowing_step_clamps_below_one() {
        let l = log(&[0.0, 1.0]);
        let p = tbe_phase(2.1, &l).unwrap();
        assert!(p < 1.0 && p > 0.999);
        // true phase at 2.1 s with a 1.25 s stride is 0.88
        assert!(p - 1.1 / 1.25 > 0.0);
    }

    #[test]
    fn online_matches_log() {
        let ts = [0.0, 1.0, 2.05, 3.1];
        let mut est = TimingEstimator::new();
        let l = log(&ts);
        let mut next = 0;
        for i in 0..350 {
            let t = i as f64 * 0.01;
            while next < ts.len() && ts[next] <= t {
                est.on_heelstrike(ts[next]);
                next += 1;
            }
            assert_eq!(est.phase(t), tbe_phase(t, &l), "t = {t}");
        }
    }
}
