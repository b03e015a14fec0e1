//! Heel-strike detection, the timing baseline and a backup reset after
//! the filter is started half a cycle out of phase.
//!
//! cargo run --release --example heelstrike_backup

use gait_ekf::baseline::{detect_heelstrike, HeelStrikeConfig};
use gait_ekf::estimator::{MeasurementVector, NoiseConfig, DEFAULT_SENSOR_SIGMA};
use gait_ekf::gait_model::{build_constraints, fit_gait_model, residual_covariance_table, GaitState};
use gait_ekf::harness::{run_stack, stride_metrics, HeelStrikeMode, StackOptions};
use gait_ekf::simdata::{generate_cohort, generate_synthetic_stream, reference_parameters, CohortConfig, ScenarioProfile};

fn main() -> gait_ekf::Result<()> {
    let reference = reference_parameters(20)?;
    let cohort = generate_cohort(&reference, &CohortConfig { seed: 4, ..CohortConfig::default() })?;
    let phi = fit_gait_model(&cohort.dataset, &build_constraints(20)?, 20)?;
    let noise = NoiseConfig::new(residual_covariance_table(&cohort.dataset, &phi)?);

    let profile = ScenarioProfile::steady(1.0, 0.0, 20.0, 100.0, 5).with_noise(DEFAULT_SENSOR_SIGMA);
    let stream = generate_synthetic_stream(&profile, &reference)?;

    let z: Vec<MeasurementVector> = stream.samples.iter().map(|s| s.z).collect();
    let log = detect_heelstrike(&z, stream.sample_rate, &HeelStrikeConfig::default());
    let truth: Vec<f64> = stream.heel_strike_indices().iter().map(|&i| stream.samples[i].time).collect();
    println!("{} heel strikes detected, {} in the ground truth", log.len(), truth.len());

    let first = stream.samples[0].truth;
    let mut opts = StackOptions::new(noise);
    opts.heelstrike_mode = HeelStrikeMode::Detected;
    opts.initial = Some(GaitState::new(0.5, first.phase_rate, first.stride_length, first.incline));
    let run = run_stack(&stream, &phi, &opts)?;
    for &i in &run.resets {
        println!("backup reset at t = {:.2} s", stream.samples[i].time);
    }
    let ekf = stride_metrics(&stream, &run.ekf, None)?;
    let tbe = stride_metrics(&stream, &run.tbe, None)?;
    println!("stride  ekf phase RMSE  tbe phase RMSE");
    for (e, t) in ekf.iter().zip(&tbe) {
        println!("{:6}  {:13.2}%  {:13.2}%", e.stride, e.phase_pct, t.phase_pct);
    }
    Ok(())
}
