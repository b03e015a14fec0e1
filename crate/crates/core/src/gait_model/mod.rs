//! Data-driven kinematic gait model.
//!
//! Four outputs (shank angle, foot angle, forward and upward heel position)
//! are expressed as `R(x) φ`, where `R` is a Kronecker product of a linear
//! ramp basis, a linear stride-length basis and a Fourier phase basis.

pub mod basis;
pub mod constraints;
pub mod covariance;
pub mod fit;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix4x3};

use crate::error::{Error, Result};

pub use basis::{
    basis_phase, basis_ramp, basis_stride, kronecker, kronecker_row, regressor_derivative,
    regressor_len, regressor_normalized,
};
pub use constraints::{build_constraints, ConstraintSet, LinearConstraints};
pub use covariance::{residual_covariance_table, CovarianceTable, KNOTS};
pub use fit::{fit_gait_model, solve_constrained_lsq, NormalEquations};

/// Harmonic order used throughout unless a test needs something smaller.
pub const DEFAULT_ORDER: usize = 20;

/// Phase at which the foot is constrained flat on the ground.
pub const FLAT_FOOT_PHASE: f64 = 0.2;

/// Gait state in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitState {
    /// Fraction of the gait cycle, kept in `[0, 1)`.
    pub phase: f64,
    /// 1/s.
    pub phase_rate: f64,
    /// Meters.
    pub stride_length: f64,
    /// Degrees; negative for declines.
    pub incline: f64,
}

impl GaitState {
    pub fn new(phase: f64, phase_rate: f64, stride_length: f64, incline: f64) -> Self {
        Self {
            phase: wrap_phase(phase),
            phase_rate,
            stride_length,
            incline,
        }
    }

    /// Stride length divided by leg length, which is what the model consumes.
    pub fn normalized_stride(&self, leg_length: f64) -> f64 {
        self.stride_length / leg_length
    }
}

/// Wrap a phase into `[0, 1)`.
pub fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(1.0);
    // rem_euclid can return exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Model output columns, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Output {
    ShankAngle = 0,
    FootAngle = 1,
    HeelForward = 2,
    HeelUp = 3,
}

impl Output {
    pub const ALL: [Output; 4] = [
        Output::ShankAngle,
        Output::FootAngle,
        Output::HeelForward,
        Output::HeelUp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Output::ShankAngle => "theta_s",
            Output::FootAngle => "theta_f",
            Output::HeelForward => "p_f",
            Output::HeelUp => "p_u",
        }
    }
}

/// Fitted coefficients mapping the regressor to one or more outputs.
///
/// Rows follow the regressor layout of [`basis`]; columns follow
/// [`Output`] for a kinematic model, or hold a single torque column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix {
    order: usize,
    coeffs: DMatrix<f64>,
}

impl ParameterMatrix {
    pub fn new(order: usize, coeffs: DMatrix<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("harmonic order must be at least 1".into()));
        }
        if coeffs.nrows() != regressor_len(order) {
            return Err(Error::LengthMismatch {
                what: "coefficient rows vs regressor length",
                left: coeffs.nrows(),
                right: regressor_len(order),
            });
        }
        if coeffs.ncols() == 0 || coeffs.ncols() > 4 {
            return Err(Error::Config(format!(
                "parameter matrix needs 1 to 4 output columns, got {}",
                coeffs.ncols()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("parameter matrix has non-finite entries".into()));
        }
        Ok(Self { order, coeffs })
    }

    pub fn zeros(order: usize, outputs: usize) -> Self {
        Self {
            order,
            coeffs: DMatrix::zeros(regressor_len(order), outputs),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.coeffs.column(j).into_owned()
    }

    /// Evaluate every output and the derivatives the filter needs at
    /// normalized coordinates. Does not allocate.
    pub fn eval(&self, p: f64, l_norm: f64, r: f64) -> GaitEval {
        let p = wrap_phase(p);
        let per = basis::phase_basis_len(self.order);
        let ncol = self.coeffs.ncols();
        let c = &self.coeffs;

        // Fourier sums per (ramp, stride) block and output, with two phase derivatives.
        let mut f = [[0.0; 4]; 4];
        let mut f1 = [[0.0; 4]; 4];
        let mut f2 = [[0.0; 4]; 4];
        for (b, fb) in f.iter_mut().enumerate() {
            for (j, v) in fb.iter_mut().enumerate().take(ncol) {
                *v = c[(b * per, j)];
            }
        }
        for m in 1..=self.order {
            let w = TAU * m as f64;
            let (s, co) = (w * p).sin_cos();
            for b in 0..4 {
                let ic = b * per + 2 * m - 1;
                for j in 0..ncol {
                    let a = c[(ic, j)];
                    let bs = c[(ic + 1, j)];
                    let v = a * co + bs * s;
                    f[b][j] += v;
                    f1[b][j] += w * (bs * co - a * s);
                    f2[b][j] -= w * w * v;
                }
            }
        }

        let wr = basis_ramp(r);
        let wl = basis_stride(l_norm);
        let dw = [1.0, -1.0];
        let mut out = GaitEval {
            outputs: ncol,
            ..GaitEval::default()
        };
        for ir in 0..2 {
            for il in 0..2 {
                let b = ir * 2 + il;
                let w = wr[ir] * wl[il];
                let wdl = wr[ir] * dw[il];
                let wdr = dw[ir] * wl[il];
                for j in 0..ncol {
                    out.value[j] += w * f[b][j];
                    out.d_p[j] += w * f1[b][j];
                    out.d_pp[j] += w * f2[b][j];
                    out.d_l[j] += wdl * f[b][j];
                    out.d_r[j] += wdr * f[b][j];
                    out.d_pl[j] += wdl * f1[b][j];
                    out.d_pr[j] += wdr * f1[b][j];
                }
            }
        }
        out
    }

    /// Outputs at a physical gait state.
    pub fn evaluate(&self, state: &GaitState, leg_length: f64) -> [f64; 4] {
        self.eval(state.phase, state.normalized_stride(leg_length), state.incline)
            .value
    }

    /// `∂(outputs)/∂(phase, stride length [m], incline)`, one row per output.
    pub fn partials(&self, state: &GaitState, leg_length: f64) -> Matrix4x3<f64> {
        let e = self.eval(state.phase, state.normalized_stride(leg_length), state.incline);
        let mut m = Matrix4x3::zeros();
        for j in 0..e.outputs {
            m[(j, 0)] = e.d_p[j];
            m[(j, 1)] = e.d_l[j] / leg_length;
            m[(j, 2)] = e.d_r[j];
        }
        m
    }

    /// Same evaluation through the explicit regressor row; slower, used to
    /// cross-check [`ParameterMatrix::eval`].
    pub fn evaluate_with_regressor(&self, p: f64, l_norm: f64, r: f64) -> DVector<f64> {
        (regressor_normalized(p, l_norm, r, self.order) * &self.coeffs).transpose()
    }
}

/// Model outputs plus first and mixed derivatives at one point.
///
/// `d_l` and `d_pl` are with respect to the normalized stride length.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaitEval {
    pub outputs: usize,
    pub value: [f64; 4],
    pub d_p: [f64; 4],
    pub d_l: [f64; 4],
    pub d_r: [f64; 4],
    pub d_pp: [f64; 4],
    pub d_pl: [f64; 4],
    pub d_pr: [f64; 4],
}
