//! Analytic gait-like waveforms and the reference model fitted to them.
//!
//! Every waveform has the form `prior(r) + l (C(p) + r D(p))`, so it is
//! bilinear in normalized stride length and incline, constant in phase at
//! zero stride, and the foot angle equals the incline at the flat-foot
//! phase. The constrained fit therefore matches them up to the truncation
//! of the Fourier series.

use std::f64::consts::TAU;

use crate::error::Result;
use crate::gait_model::{build_constraints, fit::NormalEquations, solve_constrained_lsq};
use crate::gait_model::{ParameterMatrix, FLAT_FOOT_PHASE};
use crate::simdata::SAMPLES_PER_STRIDE;

/// Typical normalized stride length; amplitudes below are quoted at it.
const NOMINAL_STRIDE: f64 = 1.3;

/// Periodic bump `exp(κ (cos 2π(p - μ) - 1))`, equal to 1 at `p = μ`.
fn bump(p: f64, mu: f64, kappa: f64) -> f64 {
    (kappa * ((TAU * (p - mu)).cos() - 1.0)).exp()
}

fn foot_shape(p: f64) -> f64 {
    // toe-up peak at heel strike, toe-down trough around toe-off; the late
    // swing term keeps the swing angular velocity single-peaked and the sine
    // cancels its slope at heel strike
    (24.0 * bump(p, 0.0, 4.0) - 60.0 * bump(p, 0.62, 10.0) + 12.0 * bump(p, 0.86, 4.0)
        + 8.70 * (TAU * p).sin())
        / NOMINAL_STRIDE
}

fn shank_shape(p: f64) -> f64 {
    let w = TAU * p;
    (18.0 * (w - TAU * 0.05).cos() - 8.0 * (2.0 * w).sin() + 6.0 * (2.0 * w).cos()) / NOMINAL_STRIDE
}

/// Foot angle, degrees.
pub fn reference_foot_angle(p: f64, l: f64, r: f64) -> f64 {
    r + l * (1.0 + 0.02 * r) * (foot_shape(p) - foot_shape(FLAT_FOOT_PHASE))
}

/// Shank angle, degrees.
pub fn reference_shank_angle(p: f64, l: f64, r: f64) -> f64 {
    let tilt = (0.5 + 0.2 * (TAU * p).cos()) / NOMINAL_STRIDE;
    l * (shank_shape(p) + r * tilt)
}

/// Forward heel position, meters.
pub fn reference_heel_forward(p: f64, l: f64, r: f64) -> f64 {
    let w = TAU * p;
    l * (0.25 * (w - TAU * 0.02).cos() + 0.03 * (2.0 * w).sin() + 0.002 * r * w.cos())
        / NOMINAL_STRIDE
}

/// Upward heel position, meters.
pub fn reference_heel_up(p: f64, l: f64, r: f64) -> f64 {
    l * (0.14 * bump(p, 0.7, 10.0) + 0.002 * r * bump(p, 0.55, 6.0)) / NOMINAL_STRIDE
}

/// Biological ankle torque, N·m, plantarflexion positive. Slightly
/// negative (dorsiflexion) just after heel strike.
pub fn reference_torque(p: f64, l: f64, r: f64) -> f64 {
    l * (80.0 * bump(p, 0.52, 22.0) + 1.5 * r * bump(p, 0.45, 15.0)) / NOMINAL_STRIDE
        - 6.0 * bump(p, 0.06, 40.0)
}

/// All four kinematic outputs in model column order `(θs, θf, pf, pu)`.
pub fn reference_outputs(p: f64, l: f64, r: f64) -> [f64; 4] {
    [
        reference_shank_angle(p, l, r),
        reference_foot_angle(p, l, r),
        reference_heel_forward(p, l, r),
        reference_heel_up(p, l, r),
    ]
}

/// Grid on which the reference model is fitted.
fn for_each_grid_point(mut f: impl FnMut(f64, f64, f64)) {
    for &r in &[-10.0, 0.0, 10.0] {
        for &l in &[0.5, 1.0, 1.5] {
            for k in 0..SAMPLES_PER_STRIDE {
                f(k as f64 / SAMPLES_PER_STRIDE as f64, l, r);
            }
        }
    }
}

/// Constrained fit of the analytic waveforms at harmonic order `order`.
pub fn reference_parameters(order: usize) -> Result<ParameterMatrix> {
    let constraints = build_constraints(order)?;
    let mut ne = NormalEquations::new(order, 4);
    for_each_grid_point(|p, l, r| ne.add_sample(p, l, r, &reference_outputs(p, l, r)));
    solve_constrained_lsq(&ne.finish(), &constraints)
}
