//! Biomimetic ankle torque surface over phase, stride length and incline.
//!
//! The surface is an unconstrained least-squares fit of scaled-down
//! biological ankle torque on the same regressor as the kinematic model.
//! Dorsiflexion (negative) torque is floored at zero when evaluated.

use crate::error::{Error, Result};
use crate::gait_model::{ConstraintSet, GaitState, NormalEquations, ParameterMatrix};
use crate::simdata::StrideDataset;

/// Biological torques are divided by this before fitting.
pub const TORQUE_SCALE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueSurface {
    phi: ParameterMatrix,
    scale: f64,
}

impl TorqueSurface {
    pub fn new(phi: ParameterMatrix, scale: f64) -> Result<Self> {
        if phi.outputs() != 1 {
            return Err(Error::Config(format!(
                "torque surface needs one output column, got {}",
                phi.outputs()
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::Config("torque scale must be positive".into()));
        }
        Ok(Self { phi, scale })
    }

    pub fn parameters(&self) -> &ParameterMatrix {
        &self.phi
    }

    /// Divisor applied to the biological torque before fitting.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Surface value before the dorsiflexion floor, N·m.
    pub fn raw(&self, state: &GaitState, leg_length: f64) -> f64 {
        self.phi.evaluate(state, leg_length)[0]
    }
}

/// Normal equations of `torque / scale` against the regressor.
pub fn torque_normal_equations(data: &StrideDataset, order: usize, scale: f64) -> Result<NormalEquations> {
    if !data.has_torque() {
        return Err(Error::InsufficientData("dataset has no torque channel".into()));
    }
    let mut ne = NormalEquations::new(order, 1);
    for subject in data.subjects() {
        for stride in &subject.strides {
            for s in &stride.samples {
                let tau = s.torque.expect("checked by has_torque") / scale;
                ne.add_sample(s.phase, s.stride_length / subject.leg_length, s.incline, &[tau]);
            }
        }
    }
    Ok(ne.finish())
}

/// Fit the torque surface without constraints.
pub fn fit_torque_model(data: &StrideDataset, order: usize) -> Result<TorqueSurface> {
    let ne = torque_normal_equations(data, order, TORQUE_SCALE)?;
    let phi = crate::gait_model::solve_constrained_lsq(&ne, &ConstraintSet::empty(order, 1))?;
    TorqueSurface::new(phi, TORQUE_SCALE)
}

/// Desired exoskeleton torque, N·m, plantarflexion positive and never
/// negative.
pub fn evaluate_torque(surface: &TorqueSurface, state: &GaitState, leg_length: f64) -> f64 {
    surface.raw(state, leg_length).max(0.0)
}
