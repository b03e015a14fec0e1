//! Leave-one-subject-out comparison of the filter and the timing baseline.
//!
//! cargo run --release --example cross_validation

use gait_ekf::harness::config::{ExperimentConfig, Mode};
use gait_ekf::harness::run_crossval;

fn main() -> gait_ekf::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Crossval);
    cfg.seed = Some(1);
    cfg.cohort.subjects = 6;
    let out = run_crossval(&cfg)?;
    let r = &out.report;
    println!("subject  ekf      tbe      backup  resets");
    for f in &r.folds {
        println!("{:7}  {:5.2}%  {:5.2}%  {:5.2}%  {}", f.subject, f.ekf.phase_pct, f.tbe.phase_pct, f.backup.phase_pct, f.resets);
    }
    println!(
        "mean phase RMSE: ekf {:.2} ± {:.2}%, tbe {:.2} ± {:.2}%",
        r.ekf.phase_pct.mean, r.ekf.phase_pct.std, r.tbe.phase_pct.mean, r.tbe.phase_pct.std
    );
    let t = &r.ekf_vs_tbe.subjects;
    println!("paired t-test over subjects: t = {:.2}, dof {}, p = {:.2e}", t.t, t.dof, t.p);
    Ok(())
}
