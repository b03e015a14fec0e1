//! Fit the ankle torque surface and read off commands across a stride.
//!
//! cargo run --release --example torque_surface

use gait_ekf::gait_model::GaitState;
use gait_ekf::simdata::{generate_cohort, reference_parameters, CohortConfig};
use gait_ekf::torque_model::{evaluate_torque, fit_torque_model};

fn main() -> gait_ekf::Result<()> {
    let reference = reference_parameters(20)?;
    let cohort = generate_cohort(&reference, &CohortConfig { seed: 2, ..CohortConfig::default() })?;
    let surface = fit_torque_model(&cohort.dataset, 20)?;
    println!("torque scale {}", surface.scale());

    let leg = 0.9;
    for incline in [-10.0, 0.0, 10.0] {
        let row: Vec<String> = (0..20)
            .map(|k| {
                let state = GaitState::new(k as f64 / 20.0, 1.0, 1.3, incline);
                format!("{:5.2}", evaluate_torque(&surface, &state, leg))
            })
            .collect();
        println!("incline {incline:+5.1}: {}", row.join(" "));
    }
    // dorsiflexion torque is never commanded
    let lowest = (0..1000)
        .map(|k| surface.raw(&GaitState::new(k as f64 / 1000.0, 1.0, 1.3, 0.0), leg))
        .fold(f64::INFINITY, f64::min);
    println!("lowest raw surface value {lowest:.3}, floored to 0 in the command");
    Ok(())
}
