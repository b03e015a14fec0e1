//! Save a fitted model to disk, load it back and use it.
//!
//! cargo run --release --example model_file

use gait_ekf::gait_model::GaitState;
use gait_ekf::harness::config::{ExperimentConfig, Mode};
use gait_ekf::harness::run_fit;
use gait_ekf::model_file::{load_gait_model, load_torque_model, save_gait_model, save_torque_model};

fn main() -> gait_ekf::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Fit);
    cfg.seed = Some(8);
    cfg.cohort.subjects = 4;
    let fit = run_fit(&cfg)?;

    let dir = std::env::temp_dir().join("gait-ekf-model-example");
    std::fs::create_dir_all(&dir)?;
    let (gait_path, torque_path) = (dir.join("gait_model.json"), dir.join("torque_model.json"));
    save_gait_model(&gait_path, &fit.model)?;
    if let Some(t) = &fit.torque {
        save_torque_model(&torque_path, t)?;
    }

    let model = load_gait_model(&gait_path)?;
    let torque = load_torque_model(&torque_path)?;
    assert_eq!(model, fit.model);
    let state = GaitState::new(0.45, 1.0, 1.3, 3.0);
    println!("loaded order {} model from {}", model.phi.order(), gait_path.display());
    println!("outputs at {state:?}: {:?}", model.phi.evaluate(&state, 0.9));
    println!("torque command: {:.3}", gait_ekf::torque_model::evaluate_torque(&torque, &state, 0.9));
    Ok(())
}
