//! Replay every built-in scenario through the full estimator stack.
//!
//! cargo run --release --example replay_scenarios

use gait_ekf::harness::config::{ExperimentConfig, Mode, NoisePreset, ScenarioKind};
use gait_ekf::harness::run_replay;

fn main() -> gait_ekf::Result<()> {
    for kind in [ScenarioKind::Steady, ScenarioKind::SpeedPulse, ScenarioKind::InclineRamp, ScenarioKind::InclineSteps] {
        let mut cfg = ExperimentConfig::new(Mode::Replay);
        cfg.seed = Some(3);
        cfg.cohort.subjects = 3;
        cfg.scenario.kind = kind;
        cfg.noise.preset = NoisePreset::Outdoor;
        let out = run_replay(&cfg)?;
        let r = &out.report;
        println!(
            "{kind:?}: {} strides, phase {:.2}%, rate {:.4}/s, stride {:.3} m, incline {:.2} deg, torque {:.3}, resets {}, p99 {:.1} us",
            r.strides,
            r.ekf.phase_pct,
            r.ekf.phase_rate,
            r.ekf.stride_length.unwrap_or(f64::NAN),
            r.ekf.incline.unwrap_or(f64::NAN),
            r.ekf.torque.unwrap_or(f64::NAN),
            r.resets,
            r.latency.p99_ns as f64 / 1e3
        );
    }
    Ok(())
}
