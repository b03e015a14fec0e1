//! Synthetic multi-subject treadmill cohort.
//!
//! Each subject gets a leg length, a cadence factor and a perturbed copy of
//! the reference model. Strides are sampled at 27 treadmill conditions
//! (three speeds by nine slopes) with stride-to-stride cadence jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_model::{basis::phase_basis_len, build_constraints, ConstraintSet, ParameterMatrix};
use crate::simdata::reference::reference_torque;
use crate::simdata::{Stride, StrideDataset, StrideSample, Subject, SAMPLES_PER_STRIDE};

pub const DEFAULT_SPEEDS: [f64; 3] = [0.8, 1.0, 1.2];

pub const DEFAULT_INCLINES: [f64; 9] = [-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0];

/// Incline at which the second corner of the ramp basis is perturbed.
const RAMP_CORNER: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub subjects: usize,
    pub strides_per_condition: usize,
    pub speeds: Vec<f64>,
    pub inclines: Vec<f64>,
    /// Relative standard deviation of the per-subject model perturbation.
    pub coefficient_jitter: f64,
    /// Relative standard deviation of per-stride cadence.
    pub rate_jitter: f64,
    /// Relative standard deviation of per-subject cadence.
    pub cadence_spread: f64,
    pub leg_length_range: (f64, f64),
    pub with_torque: bool,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            subjects: 10,
            strides_per_condition: 3,
            speeds: DEFAULT_SPEEDS.to_vec(),
            inclines: DEFAULT_INCLINES.to_vec(),
            coefficient_jitter: 0.1,
            rate_jitter: 0.03,
            cadence_spread: 0.05,
            leg_length_range: (0.8, 1.0),
            with_torque: true,
            seed: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.strides_per_condition == 0 {
            return Err(Error::Config("cohort needs at least one subject and stride".into()));
        }
        if self.speeds.is_empty() || self.inclines.is_empty() {
            return Err(Error::Config("cohort needs at least one speed and incline".into()));
        }
        if self.speeds.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("treadmill speeds must be positive".into()));
        }
        let (lo, hi) = self.leg_length_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("leg length range must be positive and ordered".into()));
        }
        if [self.coefficient_jitter, self.rate_jitter, self.cadence_spread]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::Config("jitter levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Steady-state phase rate for walking speed `speed` (m/s) and leg length
/// `leg_length` (m). Stride length follows as `speed / rate`.
pub fn nominal_phase_rate(speed: f64, leg_length: f64) -> f64 {
    0.88 * speed.sqrt() * (0.9 / leg_length).sqrt()
}

/// Perturb a kinematic model for one synthetic subject.
///
/// The jitter is applied to the waveforms at full stride and at the two
/// ramp corners `r = 0` and `r = 10`, each Fourier coefficient scaled by
/// `1 + σ ε`. Jittering the raw coefficients instead would be amplified
/// tenfold at steep inclines by the affine ramp basis. The result is
/// projected back onto `constraints`.
pub fn perturb_parameters<R: Rng + ?Sized>(
    phi: &ParameterMatrix,
    sigma: f64,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> ParameterMatrix {
    if sigma == 0.0 {
        return phi.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let per = phase_basis_len(phi.order());
    let mut c = phi.coeffs().clone();
    // block (ir, il) starts at (ir * 2 + il) * per; il = 0 is the `l` term
    let (b_r, b_one) = (0, 2 * per);
    for j in 0..c.ncols() {
        for k in 0..per {
            let at_zero = c[(b_one + k, j)];
            let at_corner = RAMP_CORNER * c[(b_r + k, j)] + (1.0 - RAMP_CORNER) * at_zero;
            let z0 = at_zero * (1.0 + normal.sample(rng));
            let z1 = at_corner * (1.0 + normal.sample(rng));
            c[(b_one + k, j)] = z0;
            c[(b_r + k, j)] = (z1 - (1.0 - RAMP_CORNER) * z0) / RAMP_CORNER;
        }
    }
    let jittered = ParameterMatrix::new(phi.order(), c).expect("jitter keeps shape and finiteness");
    constraints.project(&jittered)
}

/// A synthetic cohort: the dataset plus each subject's true model.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub dataset: StrideDataset,
    pub subject_models: Vec<ParameterMatrix>,
}

/// Generate a labeled stride dataset from `reference`.
pub fn generate_cohort(reference: &ParameterMatrix, config: &CohortConfig) -> Result<Cohort> {
    config.validate()?;
    let constraints = build_constraints(reference.order())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (lo, hi) = config.leg_length_range;
    let mut subjects = Vec::with_capacity(config.subjects);
    let mut models = Vec::with_capacity(config.subjects);
    for s in 0..config.subjects {
        let leg_length = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let cadence = 1.0 + config.cadence_spread * std_normal.sample(&mut rng);
        let phi = perturb_parameters(reference, config.coefficient_jitter, &constraints, &mut rng);
        let mut strides = Vec::new();
        for &speed in &config.speeds {
            for &incline in &config.inclines {
                for _ in 0..config.strides_per_condition {
                    let jitter = 1.0 + config.rate_jitter * std_normal.sample(&mut rng);
                    let rate = nominal_phase_rate(speed, leg_length) * cadence * jitter;
                    strides.push(synthesize_stride(
                        &phi,
                        leg_length,
                        speed,
                        incline,
                        rate,
                        config.with_torque,
                    ));
                }
            }
        }
        subjects.push(Subject {
            id: format!("S{:02}", s + 1),
            leg_length,
            strides,
        });
        models.push(phi);
    }
    Ok(Cohort {
        dataset: StrideDataset::new(subjects)?,
        subject_models: models,
    })
}

/// One stride of 150 samples at constant phase rate.
pub fn synthesize_stride(
    phi: &ParameterMatrix,
    leg_length: f64,
    speed: f64,
    incline: f64,
    phase_rate: f64,
    with_torque: bool,
) -> Stride {
    let stride_length = speed / phase_rate;
    let l_norm = stride_length / leg_length;
    let samples = (0..SAMPLES_PER_STRIDE)
        .map(|k| {
            let phase = k as f64 / SAMPLES_PER_STRIDE as f64;
            let v = phi.eval(phase, l_norm, incline).value;
            StrideSample {
                phase,
                phase_rate,
                stride_length,
                incline,
                theta_s: v[0],
                theta_f: v[1],
                p_f: v[2],
                p_u: v[3],
                torque: with_torque.then(|| reference_torque(phase, l_norm, incline)),
            }
        })
        .collect();
    Stride {
        speed,
        incline,
        samples,
    }
}
