//! Build an experiment from a TOML file layered over defaults.
//!
//! cargo run --release --example config_file

use gait_ekf::harness::config::{ExperimentConfig, Mode};
use gait_ekf::harness::run_replay;

const CONFIG: &str = r#"
mode = "replay"
seed = 12

[cohort]
subjects = 3

[scenario]
kind = "incline-steps"
duration = 40.0

[noise]
preset = "outdoor"

[backup]
ratio = 0.4
"#;

fn main() -> gait_ekf::Result<()> {
    let path = std::env::temp_dir().join("gait-ekf-example.toml");
    std::fs::write(&path, CONFIG)?;
    let cfg = ExperimentConfig::new(Mode::Replay).merged_with_file(&path)?;
    cfg.validate()?;
    println!("config hash {}", cfg.hash());

    // unknown keys are rejected rather than ignored
    std::fs::write(&path, "mode = \"replay\"\n[scenario]\nspeeed = 1.0\n")?;
    if let Err(e) = ExperimentConfig::new(Mode::Replay).merged_with_file(&path) {
        println!("rejected: {e}");
    }

    let out = run_replay(&cfg)?;
    println!("{} strides, incline RMSE {:.2} deg", out.report.strides, out.report.ekf.incline.unwrap_or(f64::NAN));
    Ok(())
}
