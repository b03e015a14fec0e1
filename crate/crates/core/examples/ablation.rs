//! Freeze stride length and incline and see what phase estimation loses.
//!
//! cargo run --release --example ablation

use gait_ekf::harness::config::{ExperimentConfig, Mode};
use gait_ekf::harness::run_ablation;

fn main() -> gait_ekf::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Ablation);
    cfg.seed = Some(1);
    cfg.cohort.subjects = 4;
    let out = run_ablation(&cfg)?;
    let r = &out.report;
    for f in &r.folds {
        println!(
            "{}: full {:.3}%  frozen {:.3}%  frozen drift {:.1e}",
            f.subject,
            f.full.phase_pct,
            f.frozen.phase_pct,
            f.frozen_drift.max()
        );
    }
    println!("mean: full {:.3}%, frozen {:.3}%", r.full.phase_pct.mean, r.frozen.phase_pct.mean);
    if let (Some(full), Some(frozen)) = (&r.full.incline, &r.frozen.incline) {
        println!("incline RMSE: full {:.2} deg, frozen {:.2} deg", full.mean, frozen.mean);
    }
    Ok(())
}
