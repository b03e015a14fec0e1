//! Fit the constrained kinematic model to a synthetic cohort and inspect it.
//!
//! cargo run --release --example fit_gait_model

use gait_ekf::gait_model::{build_constraints, fit_gait_model, residual_covariance_table, GaitState, Output};
use gait_ekf::simdata::{generate_cohort, reference_parameters, CohortConfig};

fn main() -> gait_ekf::Result<()> {
    let order = 20;
    let reference = reference_parameters(order)?;
    let cohort = generate_cohort(&reference, &CohortConfig { seed: 1, ..CohortConfig::default() })?;
    let data = &cohort.dataset;
    println!("{} subjects, {} strides, {} samples", data.subject_count(), data.stride_count(), data.sample_count());

    let constraints = build_constraints(order)?;
    let phi = fit_gait_model(data, &constraints, order)?;
    println!("{} coefficients per output, max constraint violation {:.1e}", phi.dim(), constraints.max_violation(&phi));

    // the foot lies flat on the ramp at 20% of the stride
    let leg = 0.9;
    for r in [-10.0, 0.0, 10.0] {
        let y = phi.evaluate(&GaitState::new(0.2, 1.0, 1.3, r), leg);
        println!("incline {r:+5.1} deg: foot angle {:+.6} deg", y[Output::FootAngle.index()]);
    }

    // one stride of predicted outputs at 1.3 m and +5 deg
    println!("phase  shank    foot   heel_fwd heel_up");
    for k in 0..10 {
        let p = k as f64 / 10.0;
        let y = phi.evaluate(&GaitState::new(p, 1.0, 1.3, 5.0), leg);
        println!("{p:.1}  {:+7.2} {:+7.2} {:+7.3} {:+7.3}", y[0], y[1], y[2], y[3]);
    }

    let table = residual_covariance_table(data, &phi)?;
    let k0 = &table.knots()[0];
    println!("residual variance at heel strike: {:?}", (0..6).map(|i| k0[(i, i)]).collect::<Vec<_>>());
    Ok(())
}
