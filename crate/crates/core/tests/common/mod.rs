//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use gait_ekf::gait_model::{build_constraints, residual_covariance_table, CovarianceTable, ParameterMatrix};
use gait_ekf::model_file::GaitModel;
use gait_ekf::simdata::{generate_cohort, reference_parameters, Cohort, CohortConfig};

pub const ORDER: usize = 20;

/// Reference model at the default order.
pub fn reference() -> &'static ParameterMatrix {
    static PHI: OnceLock<ParameterMatrix> = OnceLock::new();
    PHI.get_or_init(|| reference_parameters(ORDER).unwrap())
}

/// Default ten-subject synthetic cohort.
pub fn cohort() -> &'static Cohort {
    static COHORT: OnceLock<Cohort> = OnceLock::new();
    COHORT.get_or_init(|| {
        generate_cohort(reference(), &CohortConfig { seed: 7, ..CohortConfig::default() }).unwrap()
    })
}

/// Model and residual table fitted on the whole cohort.
pub fn fitted() -> &'static GaitModel {
    static MODEL: OnceLock<GaitModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let data = &cohort().dataset;
        let phi = gait_ekf::gait_model::fit_gait_model(data, &build_constraints(ORDER).unwrap(), ORDER).unwrap();
        let table = residual_covariance_table(data, &phi).unwrap();
        GaitModel { phi, table }
    })
}

/// Residual table of the reference model on the cohort.
pub fn reference_table() -> &'static CovarianceTable {
    static TABLE: OnceLock<CovarianceTable> = OnceLock::new();
    TABLE.get_or_init(|| residual_covariance_table(&cohort().dataset, reference()).unwrap())
}

/// `|a - b| <= tol * max(|b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(floor)
}

use gait_ekf::estimator::{FilterState, NoiseConfig};
use gait_ekf::gait_model::GaitState;
use gait_ekf::simdata::{generate_synthetic_stream, LabeledStream, ScenarioProfile};

/// Width of each state's operating range: one cycle, 1/s of cadence,
/// the stride transform's `(0, 4L)` and the ±10 degree model domain.
pub fn state_ranges(leg_length: f64) -> [f64; 4] {
    [1.0, 1.0, 4.0 * leg_length, 20.0]
}

/// Steady walking generated from `phi`, optionally with sensor noise.
pub fn steady_stream(
    phi: &ParameterMatrix,
    speed: f64,
    incline: f64,
    strides: usize,
    noise: Option<[f64; 6]>,
    seed: u64,
) -> LabeledStream {
    let mut profile = ScenarioProfile::steady(speed, incline, 1.0, 100.0, seed);
    let rate = profile.phase_rate.value(0.0);
    // stop just short of the next heel strike
    profile.duration = (strides as f64 + 0.5) / rate;
    if let Some(sigma) = noise {
        profile = profile.with_noise(sigma);
    }
    generate_synthetic_stream(&profile, phi).unwrap()
}

/// Run the bare filter over `stream` from `initial`, returning the
/// estimate after every sample.
pub fn run_filter(
    stream: &LabeledStream,
    phi: &ParameterMatrix,
    noise: &NoiseConfig,
    initial: impl FnOnce(&mut FilterState),
) -> Vec<GaitState> {
    let first = stream.samples[0].truth;
    let mut fs = FilterState::new(&first, stream.leg_length, stream.dt(), noise);
    initial(&mut fs);
    let mut out = Vec::with_capacity(stream.len());
    for (i, s) in stream.samples.iter().enumerate() {
        if i > 0 {
            fs.predict(noise);
        }
        fs.update(&s.z, phi, noise).unwrap();
        out.push(fs.gait_state());
    }
    out
}

/// Largest absolute error of each state over the samples from the
/// `after`-th heel strike on.
pub fn errors_after(stream: &LabeledStream, estimates: &[GaitState], after: usize) -> [f64; 4] {
    let start = stream.heel_strike_indices()[after];
    let mut worst = [0.0f64; 4];
    for (s, e) in stream.samples[start..].iter().zip(&estimates[start..]) {
        let t = s.truth;
        let d = [
            gait_ekf::harness::phase_error(e.phase, t.phase),
            e.phase_rate - t.phase_rate,
            e.stride_length - t.stride_length,
            e.incline - t.incline,
        ];
        for (w, v) in worst.iter_mut().zip(d) {
            *w = w.max(v.abs());
        }
    }
    worst
}
