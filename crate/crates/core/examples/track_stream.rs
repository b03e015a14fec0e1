//! Run the bare filter over a noisy steady-walking stream.
//!
//! cargo run --release --example track_stream

use gait_ekf::estimator::{FilterState, NoiseConfig, DEFAULT_SENSOR_SIGMA};
use gait_ekf::gait_model::{build_constraints, fit_gait_model, residual_covariance_table, GaitState};
use gait_ekf::harness::phase_error;
use gait_ekf::simdata::{generate_cohort, generate_synthetic_stream, reference_parameters, CohortConfig, ScenarioProfile};

fn main() -> gait_ekf::Result<()> {
    let reference = reference_parameters(20)?;
    let cohort = generate_cohort(&reference, &CohortConfig { seed: 3, ..CohortConfig::default() })?;
    let phi = fit_gait_model(&cohort.dataset, &build_constraints(20)?, 20)?;
    let noise = NoiseConfig::new(residual_covariance_table(&cohort.dataset, &phi)?);

    let profile = ScenarioProfile::steady(1.1, 4.0, 30.0, 100.0, 42).with_noise(DEFAULT_SENSOR_SIGMA);
    let stream = generate_synthetic_stream(&profile, &reference)?;

    // start from a generic guess rather than the truth
    let leg = stream.leg_length;
    let mut filter = FilterState::new(&GaitState::new(0.0, 0.9, 1.4 * leg, 0.0), leg, stream.dt(), &noise);
    for (i, s) in stream.samples.iter().enumerate() {
        filter.step(&s.z, &phi, &noise)?;
        if i % 250 == 0 {
            let e = filter.gait_state();
            let t = s.truth;
            println!(
                "t {:5.2}  phase {:.3} ({:+.3})  rate {:.3}/{:.3}  stride {:.3}/{:.3} m  incline {:+.2}/{:+.2} deg",
                s.time,
                e.phase,
                phase_error(e.phase, t.phase),
                e.phase_rate,
                t.phase_rate,
                e.stride_length,
                t.stride_length,
                e.incline,
                t.incline
            );
        }
    }
    Ok(())
}
