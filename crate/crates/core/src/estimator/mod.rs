//! Four-state extended Kalman filter over phase, phase rate,
//! pseudo-stride-length and incline.
//!
//! The dynamics are linear (phase integrates phase rate, the task states
//! are random walks). The measurement model is the fitted gait model plus
//! the chain-rule angular velocities of foot and shank, and the measurement
//! noise varies with phase through a cross-subject residual table.

pub mod transform;

use nalgebra::{Matrix4, Matrix6, Matrix6x4, Vector4, Vector6};

use crate::error::{Error, Result};
use crate::gait_model::{wrap_phase, CovarianceTable, GaitState, Output, ParameterMatrix};

pub use transform::{pseudo_stride, stride_transform};

/// Initial state covariance scale, `P0 = 1e-3 · I`.
pub const INITIAL_COVARIANCE: f64 = 1e-3;

/// Variance that pins a state in place when task estimation is disabled.
pub const FROZEN_VARIANCE: f64 = 1e-12;

/// Innovation covariance condition estimates above this are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Process standard deviations for phase rate, stride length and incline.
pub const DEFAULT_PROCESS_SIGMA: [f64; 3] = [6e-4, 9e-4, 6e-3];

/// Faster-responding process noise used outdoors.
pub const OUTDOOR_PROCESS_SIGMA: [f64; 3] = [1e-3, 2e-3, 5e-2];

/// Sensor standard deviations, channel order `(θf, θ̇f, θs, θ̇s, pf, pu)`.
pub const DEFAULT_SENSOR_SIGMA: [f64; 6] = [1.0, 10.0, 7.0, 20.0, 0.01, 0.08];

/// One sample of the six sensor channels.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeasurementVector {
    /// Foot angle, deg.
    pub theta_f: f64,
    /// Foot angular velocity, deg/s.
    pub theta_f_dot: f64,
    /// Shank angle, deg.
    pub theta_s: f64,
    /// Shank angular velocity, deg/s.
    pub theta_s_dot: f64,
    /// Forward heel position, m.
    pub p_f: f64,
    /// Upward heel position, m.
    pub p_u: f64,
}

impl MeasurementVector {
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.theta_f,
            self.theta_f_dot,
            self.theta_s,
            self.theta_s_dot,
            self.p_f,
            self.p_u,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            theta_f: v[0],
            theta_f_dot: v[1],
            theta_s: v[2],
            theta_s_dot: v[3],
            p_f: v[4],
            p_u: v[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Whether stride length and incline are estimated or held fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TaskStates {
    #[default]
    Estimated,
    /// Process noise and initial covariance of the task states are set to
    /// [`FROZEN_VARIANCE`], so they effectively never move.
    Frozen,
}

/// Process and measurement noise for the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub process_sigma: [f64; 3],
    pub sensor_sigma: [f64; 6],
    pub table: CovarianceTable,
    pub task_states: TaskStates,
}

impl NoiseConfig {
    pub fn new(table: CovarianceTable) -> Self {
        Self {
            process_sigma: DEFAULT_PROCESS_SIGMA,
            sensor_sigma: DEFAULT_SENSOR_SIGMA,
            table,
            task_states: TaskStates::Estimated,
        }
    }

    pub fn with_process_sigma(mut self, sigma: [f64; 3]) -> Self {
        self.process_sigma = sigma;
        self
    }

    pub fn with_sensor_sigma(mut self, sigma: [f64; 6]) -> Self {
        self.sensor_sigma = sigma;
        self
    }

    pub fn with_task_states(mut self, mode: TaskStates) -> Self {
        self.task_states = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .process_sigma
            .iter()
            .chain(self.sensor_sigma.iter())
            .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(Error::Config("noise standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// `diag(0, σ22², σ33², σ44²) · Δt`; phase has no process noise.
    pub fn process_covariance(&self, dt: f64) -> Matrix4<f64> {
        let [s2, s3, s4] = self.process_sigma;
        let (v3, v4) = match self.task_states {
            TaskStates::Estimated => (s3 * s3, s4 * s4),
            TaskStates::Frozen => (FROZEN_VARIANCE, FROZEN_VARIANCE),
        };
        Matrix4::from_diagonal(&Vector4::new(0.0, s2 * s2, v3, v4)) * dt
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        let task = match self.task_states {
            TaskStates::Estimated => INITIAL_COVARIANCE,
            TaskStates::Frozen => FROZEN_VARIANCE,
        };
        Matrix4::from_diagonal(&Vector4::new(
            INITIAL_COVARIANCE,
            INITIAL_COVARIANCE,
            task,
            task,
        ))
    }

    pub fn sensor_covariance(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::from_iterator(
            self.sensor_sigma.iter().map(|s| s * s),
        ))
    }

    /// Heteroscedastic measurement covariance at phase `p`.
    pub fn het_noise(&self, p: f64) -> Matrix6<f64> {
        let mut r = self.table.interpolate(p);
        for (i, s) in self.sensor_sigma.iter().enumerate() {
            r[(i, i)] += s * s;
        }
        r
    }
}

/// Predicted measurement and its Jacobian with respect to
/// `(p, ṗ, l_p, r)` at one internal state.
pub fn measure(
    phi: &ParameterMatrix,
    x: &Vector4<f64>,
    leg_length: f64,
) -> (Vector6<f64>, Matrix6x4<f64>) {
    let (p, rate, lp, r) = (x[0], x[1], x[2], x[3]);
    let (l, dl_dlp) = stride_transform(lp, leg_length);
    let e = phi.eval(p, l / leg_length, r);
    // d(l/L)/dl_p
    let g = dl_dlp / leg_length;
    let ft = Output::FootAngle.index();
    let sh = Output::ShankAngle.index();
    let pf = Output::HeelForward.index();
    let pu = Output::HeelUp.index();

    let z = Vector6::new(
        e.value[ft],
        e.d_p[ft] * rate,
        e.value[sh],
        e.d_p[sh] * rate,
        e.value[pf],
        e.value[pu],
    );

    let mut h = Matrix6x4::zeros();
    for (row, j) in [(0, ft), (2, sh), (4, pf), (5, pu)] {
        h[(row, 0)] = e.d_p[j];
        h[(row, 2)] = e.d_l[j] * g;
        h[(row, 3)] = e.d_r[j];
    }
    for (row, j) in [(1, ft), (3, sh)] {
        h[(row, 0)] = e.d_pp[j] * rate;
        h[(row, 1)] = e.d_p[j];
        h[(row, 2)] = e.d_pl[j] * rate * g;
        h[(row, 3)] = e.d_pr[j] * rate;
    }
    (z, h)
}

/// Predicted sensor readings at internal state `(p, ṗ, l_p, r)`.
pub fn measurement_model(
    phi: &ParameterMatrix,
    x: &Vector4<f64>,
    leg_length: f64,
) -> MeasurementVector {
    MeasurementVector::from_vector(&measure(phi, x, leg_length).0)
}

/// Analytic 6×4 Jacobian of [`measurement_model`].
pub fn measurement_jacobian(
    phi: &ParameterMatrix,
    x: &Vector4<f64>,
    leg_length: f64,
) -> Matrix6x4<f64> {
    measure(phi, x, leg_length).1
}

/// Cholesky-based condition estimate `(max Lᵢᵢ / min Lᵢᵢ)²`; a lower bound
/// on the true 2-norm condition number.
pub(crate) fn condition_estimate<const D: usize>(
    l: &nalgebra::SMatrix<f64, D, D>,
) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..D {
        let d = l[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (hi / lo).powi(2)
}

/// Result of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    /// Pre-update residual `z - h(x̂)`.
    pub residual: Vector6<f64>,
    /// `‖residual‖²`, accumulated per stride for the backup arbitration.
    pub ssr_increment: f64,
}

/// EKF state: internal estimate `(p, ṗ, l_p, r)` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub leg_length: f64,
    pub dt: f64,
}

impl FilterState {
    /// Start from a physical gait state with the configured initial covariance.
    pub fn new(initial: &GaitState, leg_length: f64, dt: f64, noise: &NoiseConfig) -> Self {
        Self {
            x: Vector4::new(
                wrap_phase(initial.phase),
                initial.phase_rate,
                pseudo_stride(initial.stride_length, leg_length),
                initial.incline,
            ),
            p: noise.initial_covariance(),
            leg_length,
            dt,
        }
    }

    /// Current estimate with stride length mapped back to meters.
    pub fn gait_state(&self) -> GaitState {
        GaitState {
            phase: self.x[0],
            phase_rate: self.x[1],
            stride_length: stride_transform(self.x[2], self.leg_length).0,
            incline: self.x[3],
        }
    }

    /// Overwrite the state vector and restart the covariance.
    pub fn reset_to(&mut self, x: Vector4<f64>, noise: &NoiseConfig) {
        self.x = x;
        self.x[0] = wrap_phase(self.x[0]);
        self.p = noise.initial_covariance();
    }

    fn transition(&self) -> Matrix4<f64> {
        let mut f = Matrix4::identity();
        f[(0, 1)] = self.dt;
        f
    }

    /// Propagate one time step and wrap the phase into `[0, 1)`.
    pub fn predict(&mut self, noise: &NoiseConfig) {
        let f = self.transition();
        self.x = f * self.x;
        self.x[0] = wrap_phase(self.x[0]);
        self.p = f * self.p * f.transpose() + noise.process_covariance(self.dt);
        self.p = (self.p + self.p.transpose()) * 0.5;
    }

    /// Standard EKF correction with phase-dependent measurement noise.
    pub fn update(
        &mut self,
        z: &MeasurementVector,
        phi: &ParameterMatrix,
        noise: &NoiseConfig,
    ) -> Result<UpdateOutcome> {
        let (predicted, h) = measure(phi, &self.x, self.leg_length);
        let residual = z.to_vector() - predicted;
        let s = h * self.p * h.transpose() + noise.het_noise(self.x[0]);
        let s = (s + s.transpose()) * 0.5;
        let chol = s.cholesky().ok_or(Error::SingularInnovation {
            condition: f64::INFINITY,
        })?;
        let condition = condition_estimate(&chol.l());
        if !(condition <= MAX_INNOVATION_CONDITION) {
            return Err(Error::SingularInnovation { condition });
        }
        // K = P Hᵀ S⁻¹, from S Kᵀ = H P
        let hp = h * self.p;
        let gain = chol.solve(&hp).transpose();
        self.x += gain * residual;
        self.x[0] = wrap_phase(self.x[0]);
        self.p -= gain * hp;
        self.p = (self.p + self.p.transpose()) * 0.5;
        Ok(UpdateOutcome {
            residual,
            ssr_increment: residual.norm_squared(),
        })
    }

    /// `predict` followed by `update`.
    pub fn step(
        &mut self,
        z: &MeasurementVector,
        phi: &ParameterMatrix,
        noise: &NoiseConfig,
    ) -> Result<UpdateOutcome> {
        self.predict(noise);
        self.update(z, phi, noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_model() -> ParameterMatrix {
        crate::simdata::reference::reference_parameters(6).unwrap()
    }

    fn noise() -> NoiseConfig {
        NoiseConfig::new(CovarianceTable::zeros())
    }

    #[test]
    fn predict_integrates_phase() {
        let n = noise();
        let mut fs = FilterState::new(&GaitState::new(0.5, 1.0, 1.0, 5.0), 0.9, 0.01, &n);
        fs.x[2] = 0.0;
        fs.predict(&n);
        assert!((fs.x[0] - 0.51).abs() < 1e-15);
        assert_eq!(fs.x[1], 1.0);
        assert_eq!(fs.x[2], 0.0);
        assert_eq!(fs.x[3], 5.0);
    }

    #[test]
    fn predict_wraps_phase_without_touching_rate() {
        let n = noise();
        let mut fs = FilterState::new(&GaitState::new(0.995, 1.0, 1.0, 0.0), 0.9, 0.01, &n);
        let p_before = fs.p;
        fs.predict(&n);
        assert!((fs.x[0] - 0.005).abs() < 1e-12);
        assert_eq!(fs.x[1], 1.0);
        let mut manual = FilterState { x: fs.x, p: p_before, ..fs.clone() };
        manual.x[0] = 0.995;
        let f = manual.transition();
        let expected = f * p_before * f.transpose() + n.process_covariance(0.01);
        assert!((fs.p - expected).amax() < 1e-18);
    }

    #[test]
    fn process_covariance_values() {
        let q = noise().process_covariance(0.01);
        let want = [0.0, 3.6e-9, 8.1e-9, 3.6e-7];
        for (i, w) in want.iter().enumerate() {
            assert!((q[(i, i)] - w).abs() <= 1e-12 * w.max(1e-20), "{i}: {}", q[(i, i)]);
        }
        let frozen = noise().with_task_states(TaskStates::Frozen);
        assert_eq!(frozen.process_covariance(1.0)[(2, 2)], FROZEN_VARIANCE);
        assert_eq!(frozen.initial_covariance()[(3, 3)], FROZEN_VARIANCE);
    }

    #[test]
    fn initial_covariance_is_scaled_identity() {
        assert_eq!(noise().initial_covariance(), Matrix4::identity() * 1e-3);
    }

    #[test]
    fn zero_innovation_leaves_state_unchanged() {
        let phi = test_model();
        let n = noise();
        let mut fs = FilterState::new(&GaitState::new(0.3, 0.9, 1.2, 2.0), 0.9, 0.01, &n);
        let z = measurement_model(&phi, &fs.x, fs.leg_length);
        let before = fs.x;
        let out = fs.update(&z, &phi, &n).unwrap();
        assert_eq!(out.residual, Vector6::zeros());
        assert_eq!(out.ssr_increment, 0.0);
        assert!((fs.x - before).amax() < 1e-15);
    }

    #[test]
    fn velocities_follow_chain_rule() {
        let phi = test_model();
        let x = Vector4::new(0.42, 0.0, -0.4, 3.0);
        let z = measurement_model(&phi, &x, 0.9);
        assert_eq!(z.theta_f_dot, 0.0);
        assert_eq!(z.theta_s_dot, 0.0);
        let x1 = Vector4::new(0.42, 0.8, -0.4, 3.0);
        let x2 = Vector4::new(0.42, 1.6, -0.4, 3.0);
        let (a, b) = (measurement_model(&phi, &x1, 0.9), measurement_model(&phi, &x2, 0.9));
        assert!((2.0 * a.theta_f_dot - b.theta_f_dot).abs() < 1e-9);
        assert!((2.0 * a.theta_s_dot - b.theta_s_dot).abs() < 1e-9);
    }

    #[test]
    fn jacobian_structure() {
        let phi = test_model();
        let h = measurement_jacobian(&phi, &Vector4::new(0.1, 0.9, 0.3, 1.0), 0.9);
        for row in [0, 2, 4, 5] {
            assert_eq!(h[(row, 1)], 0.0);
        }
        let far = measurement_jacobian(&phi, &Vector4::new(0.1, 0.9, 1e9, 1.0), 0.9);
        assert!(far.column(2).amax() < 1e-12);
    }

    #[test]
    fn het_noise_adds_sensor_variance() {
        let n = noise();
        let r = n.het_noise(0.37);
        let want = [1.0, 100.0, 49.0, 400.0, 1e-4, 6.4e-3];
        for (i, w) in want.iter().enumerate() {
            assert!((r[(i, i)] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(noise().with_process_sigma([0.0, 1.0, 1.0]).validate().is_err());
        assert!(noise().validate().is_ok());
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let phi = test_model();
        let mut n = noise();
        n.sensor_sigma = [1.0, 1e-9, 1.0, 1.0, 1.0, 1.0];
        let mut fs = FilterState::new(&GaitState::new(0.3, 0.9, 1.2, 2.0), 0.9, 0.01, &n);
        fs.p = Matrix4::zeros();
        let z = MeasurementVector::default();
        assert!(matches!(
            fs.update(&z, &phi, &n),
            Err(Error::SingularInnovation { .. })
        ));
    }
}
