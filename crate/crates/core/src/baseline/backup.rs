//! Heel-strike-timed backup estimator and the residual-based reset.
//!
//! The backup takes phase from heel-strike timing, refreshes its phase rate
//! once per heel strike, and runs a two-state EKF over `(l_p, r)` with the
//! same measurement model as the main filter. Its stride-wise sum of squared
//! residuals is compared with the main filter's at every heel strike.

use nalgebra::{Matrix2, Vector2, Vector4};

use super::tbe::PHASE_CEILING;
use crate::error::{Error, Result};
use crate::estimator::{
    condition_estimate, measure, pseudo_stride, stride_transform, FilterState, MeasurementVector,
    NoiseConfig, MAX_INNOVATION_CONDITION,
};
use crate::gait_model::{GaitState, ParameterMatrix};

/// Default reset ratio: the backup must halve the main filter's SSR.
pub const DEFAULT_RESET_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BackupEstimator {
    phase: f64,
    phase_rate: f64,
    x: Vector2<f64>,
    p: Matrix2<f64>,
    ssr: f64,
    last_heelstrike: Option<f64>,
    /// True once a stride period has been measured.
    rate_known: bool,
    /// True when the current stride began with a measured rate.
    stride_valid: bool,
    leg_length: f64,
    dt: f64,
}

impl BackupEstimator {
    /// Start with a guess of the task states; `phase_rate` is used until
    /// the first full stride has been timed. The task-state covariance
    /// follows the main filter's, so freezing one freezes both.
    pub fn new(initial: &GaitState, leg_length: f64, dt: f64, noise: &NoiseConfig) -> Self {
        let p0 = noise.initial_covariance();
        Self {
            phase: initial.phase,
            phase_rate: initial.phase_rate,
            x: Vector2::new(pseudo_stride(initial.stride_length, leg_length), initial.incline),
            p: Matrix2::new(p0[(2, 2)], 0.0, 0.0, p0[(3, 3)]),
            ssr: 0.0,
            last_heelstrike: None,
            rate_known: false,
            stride_valid: false,
            leg_length,
            dt,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn phase_rate(&self) -> f64 {
        self.phase_rate
    }

    /// Whether the phase rate comes from a measured stride period.
    pub fn rate_known(&self) -> bool {
        self.rate_known
    }

    pub fn stride_ssr(&self) -> f64 {
        self.ssr
    }

    /// Full internal state `(p, ṗ, l_p, r)`.
    pub fn internal_state(&self) -> Vector4<f64> {
        Vector4::new(self.phase, self.phase_rate, self.x[0], self.x[1])
    }

    pub fn gait_state(&self) -> GaitState {
        GaitState {
            phase: self.phase,
            phase_rate: self.phase_rate,
            stride_length: stride_transform(self.x[0], self.leg_length).0,
            incline: self.x[1],
        }
    }

    /// Register a heel strike at `t`. Returns the SSR of the stride that just
    /// ended when that stride was timed with a measured rate.
    pub fn on_heelstrike(&mut self, t: f64) -> Option<f64> {
        let completed = self.stride_valid.then_some(self.ssr);
        if let Some(last) = self.last_heelstrike {
            let period = t - last;
            if period > 0.0 {
                self.phase_rate = 1.0 / period;
                self.rate_known = true;
            }
        }
        self.last_heelstrike = Some(t);
        self.stride_valid = self.rate_known;
        self.phase = 0.0;
        self.ssr = 0.0;
        completed
    }

    /// Advance to time `t` and correct `(l_p, r)` with measurement `z`.
    pub fn step(
        &mut self,
        t: f64,
        z: &MeasurementVector,
        phi: &ParameterMatrix,
        noise: &NoiseConfig,
    ) -> Result<f64> {
        if let Some(last) = self.last_heelstrike {
            self.phase = ((t - last) * self.phase_rate).clamp(0.0, PHASE_CEILING);
        } else {
            self.phase = crate::gait_model::wrap_phase(self.phase + self.phase_rate * self.dt);
        }

        let q = noise.process_covariance(self.dt);
        self.p[(0, 0)] += q[(2, 2)];
        self.p[(1, 1)] += q[(3, 3)];

        let (predicted, h_full) = measure(phi, &self.internal_state(), self.leg_length);
        let h = h_full.fixed_columns::<2>(2).into_owned();
        let residual = z.to_vector() - predicted;
        let s = h * self.p * h.transpose() + noise.het_noise(self.phase);
        let s = (s + s.transpose()) * 0.5;
        let chol = s.cholesky().ok_or(Error::SingularInnovation {
            condition: f64::INFINITY,
        })?;
        let condition = condition_estimate(&chol.l());
        if !(condition <= MAX_INNOVATION_CONDITION) {
            return Err(Error::SingularInnovation { condition });
        }
        let hp = h * self.p;
        let gain = chol.solve(&hp).transpose();
        self.x += gain * residual;
        self.p -= gain * hp;
        self.p = (self.p + self.p.transpose()) * 0.5;
        let increment = residual.norm_squared();
        self.ssr += increment;
        Ok(increment)
    }
}

/// At a backup heel strike, replace the main filter's state with the
/// backup's when `backup_ssr < ratio · ekf_ssr`. The main filter's stride
/// SSR is cleared either way. Returns whether the reset fired.
pub fn ssr_compare_and_reset(
    ekf_ssr: &mut f64,
    backup_ssr: f64,
    fs: &mut FilterState,
    bs: &BackupEstimator,
    ratio: f64,
    noise: &NoiseConfig,
) -> bool {
    let fire = backup_ssr < ratio * *ekf_ssr;
    if fire {
        fs.reset_to(bs.internal_state(), noise);
    }
    *ekf_ssr = 0.0;
    fire
}
