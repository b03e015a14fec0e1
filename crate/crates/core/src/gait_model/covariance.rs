//! Phase-indexed covariance of the model residuals across subjects.

use nalgebra::{Matrix6, Vector6};

use super::{Output, ParameterMatrix};
use crate::error::{Error, Result};
use crate::simdata::{Stride, StrideDataset, SAMPLES_PER_STRIDE};

/// Number of phase knots in the residual covariance table.
pub const KNOTS: usize = SAMPLES_PER_STRIDE;

/// One 6×6 covariance per phase knot `k / KNOTS`, in measurement channel
/// order `(θf, θ̇f, θs, θ̇s, pf, pu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    knots: Vec<Matrix6<f64>>,
}

impl CovarianceTable {
    pub fn new(knots: Vec<Matrix6<f64>>) -> Result<Self> {
        if knots.len() != KNOTS {
            return Err(Error::LengthMismatch {
                what: "covariance knots",
                left: knots.len(),
                right: KNOTS,
            });
        }
        Ok(Self { knots })
    }

    pub fn zeros() -> Self {
        Self {
            knots: vec![Matrix6::zeros(); KNOTS],
        }
    }

    pub fn knots(&self) -> &[Matrix6<f64>] {
        &self.knots
    }

    /// Periodic element-wise linear interpolation at phase `p`.
    pub fn interpolate(&self, p: f64) -> Matrix6<f64> {
        let u = super::wrap_phase(p) * KNOTS as f64;
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 {
            return self.knots[nearest as usize % KNOTS];
        }
        let i = u.floor() as usize % KNOTS;
        let f = u - u.floor();
        self.knots[i] * (1.0 - f) + self.knots[(i + 1) % KNOTS] * f
    }
}

/// Derivative of stride samples with respect to phase, by circular central
/// differences over the 150 phase-indexed samples.
pub(crate) fn phase_derivative(stride: &Stride, output: Output) -> Vec<f64> {
    let s = &stride.samples;
    let n = s.len();
    let j = output.index();
    (0..n)
        .map(|k| {
            let prev = (k + n - 1) % n;
            let next = (k + 1) % n;
            let mut dp = s[next].phase - s[prev].phase;
            if dp <= 0.0 {
                dp += 1.0;
            }
            (s[next].outputs()[j] - s[prev].outputs()[j]) / dp
        })
        .collect()
}

/// Measured six-channel vector of every sample in a stride, velocities from
/// the phase derivative times the labeled phase rate.
pub(crate) fn stride_measurements(stride: &Stride) -> Vec<Vector6<f64>> {
    let dfoot = phase_derivative(stride, Output::FootAngle);
    let dshank = phase_derivative(stride, Output::ShankAngle);
    stride
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Vector6::new(
                s.theta_f,
                dfoot[k] * s.phase_rate,
                s.theta_s,
                dshank[k] * s.phase_rate,
                s.p_f,
                s.p_u,
            )
        })
        .collect()
}

/// Sample covariance of the measurement residuals at each phase knot,
/// pooled over every subject and condition in `data`.
pub fn residual_covariance_table(
    data: &StrideDataset,
    phi: &ParameterMatrix,
) -> Result<CovarianceTable> {
    let mut residuals: Vec<Vec<Vector6<f64>>> = vec![Vec::new(); KNOTS];
    for subject in data.subjects() {
        for stride in &subject.strides {
            let meas = stride_measurements(stride);
            for (k, (s, z)) in stride.samples.iter().zip(meas).enumerate() {
                let e = phi.eval(s.phase, s.stride_length / subject.leg_length, s.incline);
                let (sh, ft) = (Output::ShankAngle.index(), Output::FootAngle.index());
                let predicted = Vector6::new(
                    e.value[ft],
                    e.d_p[ft] * s.phase_rate,
                    e.value[sh],
                    e.d_p[sh] * s.phase_rate,
                    e.value[Output::HeelForward.index()],
                    e.value[Output::HeelUp.index()],
                );
                residuals[k].push(z - predicted);
            }
        }
    }

    let knots = residuals
        .iter()
        .enumerate()
        .map(|(k, rs)| {
            if rs.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "knot {k} has {} residual samples, need at least 2",
                    rs.len()
                )));
            }
            let n = rs.len() as f64;
            let mean = rs.iter().sum::<Vector6<f64>>() / n;
            let mut cov = Matrix6::zeros();
            for r in rs {
                let d = r - mean;
                cov += d * d.transpose();
            }
            cov /= n - 1.0;
            Ok((cov + cov.transpose()) * 0.5)
        })
        .collect::<Result<Vec<_>>>()?;
    CovarianceTable::new(knots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_hits_knots_and_wraps() {
        let knots: Vec<Matrix6<f64>> = (0..KNOTS)
            .map(|k| Matrix6::identity() * (k as f64 + 1.0))
            .collect();
        let t = CovarianceTable::new(knots).unwrap();
        for k in [0usize, 7, 73, 149] {
            assert_eq!(t.interpolate(k as f64 / KNOTS as f64), t.knots()[k]);
        }
        // halfway across the 1 -> 0 seam
        let mid = t.interpolate((KNOTS as f64 - 0.5) / KNOTS as f64);
        assert!((mid[(0, 0)] - 75.5).abs() < 1e-9);
        let quarter = t.interpolate(10.25 / KNOTS as f64);
        assert!((quarter[(2, 2)] - 11.25).abs() < 1e-9);
    }

    #[test]
    fn wrong_knot_count_is_rejected() {
        assert!(CovarianceTable::new(vec![Matrix6::zeros(); 10]).is_err());
    }
}
