//! Continuous labeled sensor streams: synthetic scenarios and
//! concatenated dataset strides.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::MeasurementVector;
use crate::gait_model::{build_constraints, GaitState, Output, ParameterMatrix};
use crate::simdata::cohort::perturb_parameters;
use crate::simdata::{Subject, SAMPLES_PER_STRIDE};

/// Piecewise-linear function of time given by `(time, value)` knots.
///
/// Constant before the first knot and after the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![(0.0, value)],
        }
    }

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let s = Self { knots };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::Config("schedule needs at least one knot".into()));
        }
        if self.knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Config("schedule knots must be finite".into()));
        }
        if self.knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("schedule knot times must increase".into()));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    /// Exact integral of the schedule over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        // trapezoids between consecutive breakpoints are exact for a piecewise-linear function
        let mut total = 0.0;
        let (mut prev_t, mut prev_v) = (0.0, self.value(0.0));
        let inner = self.knots.iter().map(|k| k.0).filter(|&kt| kt > 0.0 && kt < t);
        for kt in inner.chain(std::iter::once(t)) {
            let v = self.value(kt);
            total += 0.5 * (prev_v + v) * (kt - prev_t);
            prev_t = kt;
            prev_v = v;
        }
        total
    }
}

/// Specification of a synthetic walking scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProfile {
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Meters.
    pub leg_length: f64,
    /// 1/s.
    pub phase_rate: Schedule,
    /// Meters.
    pub stride_length: Schedule,
    /// Degrees.
    pub incline: Schedule,
    /// Per-channel measurement noise, channel order `(θf, θ̇f, θs, θ̇s, pf, pu)`.
    pub noise_sigma: [f64; 6],
    /// Relative model perturbation for the simulated subject.
    pub subject_jitter: f64,
    pub seed: u64,
}

impl ScenarioProfile {
    /// Steady walking at `speed` m/s on a fixed incline.
    pub fn steady(speed: f64, incline: f64, duration: f64, sample_rate: f64, seed: u64) -> Self {
        let leg_length = 0.9;
        let rate = crate::simdata::cohort::nominal_phase_rate(speed, leg_length);
        Self {
            duration,
            sample_rate,
            leg_length,
            phase_rate: Schedule::constant(rate),
            stride_length: Schedule::constant(speed / rate),
            incline: Schedule::constant(incline),
            noise_sigma: [0.0; 6],
            subject_jitter: 0.0,
            seed,
        }
    }

    /// Twenty seconds at 1.2 m/s then twenty seconds at 0.8 m/s, with a
    /// one-second transition.
    pub fn speed_pulse(sample_rate: f64, seed: u64) -> Self {
        let leg_length = 0.9;
        let fast = crate::simdata::cohort::nominal_phase_rate(1.2, leg_length);
        let slow = crate::simdata::cohort::nominal_phase_rate(0.8, leg_length);
        Self {
            duration: 40.0,
            sample_rate,
            leg_length,
            phase_rate: Schedule {
                knots: vec![(0.0, fast), (20.0, fast), (21.0, slow)],
            },
            stride_length: Schedule {
                knots: vec![(0.0, 1.2 / fast), (20.0, 1.2 / fast), (21.0, 0.8 / slow)],
            },
            incline: Schedule::constant(0.0),
            noise_sigma: [0.0; 6],
            subject_jitter: 0.0,
            seed,
        }
    }

    /// Incline ramping from 0 to 10 degrees over 70 s at 1 m/s, after five
    /// seconds of level walking.
    pub fn incline_ramp(sample_rate: f64, seed: u64) -> Self {
        let mut p = Self::steady(1.0, 0.0, 80.0, sample_rate, seed);
        p.incline = Schedule {
            knots: vec![(0.0, 0.0), (5.0, 0.0), (75.0, 10.0)],
        };
        p
    }

    /// Incline alternating between -10 and 10 degrees in 15 s blocks.
    pub fn incline_steps(sample_rate: f64, seed: u64) -> Self {
        let mut p = Self::steady(1.0, 0.0, 90.0, sample_rate, seed);
        let mut knots = Vec::new();
        for (i, r) in [0.0, 10.0, -10.0, 5.0, -5.0, 0.0].iter().enumerate() {
            let t0 = 15.0 * i as f64;
            knots.push((t0 + if i == 0 { 0.0 } else { 1.0 }, *r));
            knots.push((t0 + 15.0, *r));
        }
        knots.dedup_by(|a, b| a.0 == b.0);
        p.incline = Schedule { knots };
        p
    }

    pub fn with_noise(mut self, sigma: [f64; 6]) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.sample_rate > 0.0) || !(self.leg_length > 0.0) {
            return Err(Error::Config(
                "scenario duration, sample rate and leg length must be positive".into(),
            ));
        }
        if self.noise_sigma.iter().any(|s| !(*s >= 0.0)) || !(self.subject_jitter >= 0.0) {
            return Err(Error::Config("scenario noise levels must be non-negative".into()));
        }
        self.phase_rate.validate()?;
        self.stride_length.validate()?;
        self.incline.validate()
    }

    /// Number of samples, `ceil(duration · rate)`.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate - 1e-9).ceil().max(0.0) as usize
    }
}

/// One sample of a labeled stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSample {
    /// Seconds, exactly `index / rate`.
    pub time: f64,
    pub z: MeasurementVector,
    pub truth: GaitState,
    /// Set on the first sample of each stride.
    pub heel_strike: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub sample_rate: f64,
    pub leg_length: f64,
    pub samples: Vec<StreamSample>,
}

const STREAM_HEADER: [&str; 12] = [
    "time_s",
    "theta_f_deg",
    "theta_f_dot_dps",
    "theta_s_deg",
    "theta_s_dot_dps",
    "p_f_m",
    "p_u_m",
    "phase",
    "phase_rate",
    "stride_length_m",
    "incline_deg",
    "hs_flag",
];

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Sample indices carrying a heel-strike flag.
    pub fn heel_strike_indices(&self) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.heel_strike)
            .map(|(i, _)| i)
            .collect()
    }

    /// Completed strides: heel strikes after the first sample.
    pub fn stride_count(&self) -> usize {
        self.heel_strike_indices().len().saturating_sub(1)
    }

    /// Add zero-mean Gaussian noise to every measurement channel.
    pub fn add_noise(&mut self, sigma: &[f64; 6], seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normals: Vec<Option<Normal<f64>>> = sigma
            .iter()
            .map(|s| (*s > 0.0).then(|| Normal::new(0.0, *s).expect("positive sigma")))
            .collect();
        for s in &mut self.samples {
            let mut v = s.z.to_vector();
            for (i, n) in normals.iter().enumerate() {
                if let Some(n) = n {
                    v[i] += n.sample(&mut rng);
                }
            }
            s.z = MeasurementVector::from_vector(&v);
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(STREAM_HEADER)?;
        for s in &self.samples {
            let z = &s.z;
            let t = &s.truth;
            w.write_record(&[
                s.time.to_string(),
                z.theta_f.to_string(),
                z.theta_f_dot.to_string(),
                z.theta_s.to_string(),
                z.theta_s_dot.to_string(),
                z.p_f.to_string(),
                z.p_u.to_string(),
                t.phase.to_string(),
                t.phase_rate.to_string(),
                t.stride_length.to_string(),
                t.incline.to_string(),
                u8::from(s.heel_strike).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Noise-free measurement of a physical gait state from a model.
pub fn ideal_measurement(phi: &ParameterMatrix, state: &GaitState, leg_length: f64) -> MeasurementVector {
    let e = phi.eval(state.phase, state.normalized_stride(leg_length), state.incline);
    let (sh, ft) = (Output::ShankAngle.index(), Output::FootAngle.index());
    MeasurementVector {
        theta_f: e.value[ft],
        theta_f_dot: e.d_p[ft] * state.phase_rate,
        theta_s: e.value[sh],
        theta_s_dot: e.d_p[sh] * state.phase_rate,
        p_f: e.value[Output::HeelForward.index()],
        p_u: e.value[Output::HeelUp.index()],
    }
}

/// Simulate a scenario for a subject whose model is `phi_true`, perturbed by
/// the profile's subject jitter.
pub fn generate_synthetic_stream(
    profile: &ScenarioProfile,
    phi_true: &ParameterMatrix,
) -> Result<LabeledStream> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let phi = if profile.subject_jitter > 0.0 {
        let set = build_constraints(phi_true.order())?;
        perturb_parameters(phi_true, profile.subject_jitter, &set, &mut rng)
    } else {
        phi_true.clone()
    };
    let n = profile.sample_count();
    let mut samples = Vec::with_capacity(n);
    let mut prev_cycles = 0i64;
    for i in 0..n {
        let time = i as f64 / profile.sample_rate;
        let cycles = profile.phase_rate.integral(time);
        let whole = cycles.floor();
        let heel_strike = i == 0 || whole as i64 > prev_cycles;
        prev_cycles = whole as i64;
        let truth = GaitState {
            phase: cycles - whole,
            phase_rate: profile.phase_rate.value(time),
            stride_length: profile.stride_length.value(time),
            incline: profile.incline.value(time),
        };
        samples.push(StreamSample {
            time,
            z: ideal_measurement(&phi, &truth, profile.leg_length),
            truth,
            heel_strike,
        });
    }
    let mut stream = LabeledStream {
        sample_rate: profile.sample_rate,
        leg_length: profile.leg_length,
        samples,
    };
    if profile.noise_sigma.iter().any(|s| *s > 0.0) {
        stream.add_noise(&profile.noise_sigma, rng_seed_after(profile.seed));
    }
    Ok(stream)
}

fn rng_seed_after(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// How ground-truth phase is assigned within a concatenated stride.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseTruth {
    /// Elapsed time times the stride's constant phase rate.
    #[default]
    ConstantRate,
    /// Interpolated from the dataset's 150 phase labels.
    Labels,
}

/// Periodic Catmull-Rom value and derivative at fractional index `u`.
fn catmull_rom(y: &[f64], u: f64) -> (f64, f64) {
    let n = y.len();
    let i = u.floor();
    let t = u - i;
    let i = (i as i64).rem_euclid(n as i64) as usize;
    let p0 = y[(i + n - 1) % n];
    let p1 = y[i];
    let p2 = y[(i + 1) % n];
    let p3 = y[(i + 2) % n];
    let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    let c = -0.5 * p0 + 0.5 * p2;
    let value = ((a * t + b) * t + c) * t + p1;
    let slope = (3.0 * a * t + 2.0 * b) * t + c;
    (value, slope)
}

/// Resample the strides `order` of `subject` to a continuous stream at
/// `rate` Hz, each stride lasting `1 / phase_rate` seconds.
pub fn concatenate_strides(
    subject: &Subject,
    order: &[usize],
    rate: f64,
    truth_mode: PhaseTruth,
) -> Result<LabeledStream> {
    if order.is_empty() {
        return Err(Error::InsufficientData("no strides to concatenate".into()));
    }
    if !(rate > 0.0) {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    if let Some(&bad) = order.iter().find(|&&k| k >= subject.strides.len()) {
        return Err(Error::InsufficientData(format!(
            "stride {bad} out of range for subject {} with {} strides",
            subject.id,
            subject.strides.len()
        )));
    }
    let n = SAMPLES_PER_STRIDE as f64;
    let total: f64 = order.iter().map(|&k| subject.strides[k].duration()).sum();
    let count = (total * rate - 1e-9).ceil() as usize;
    let mut samples = Vec::with_capacity(count);

    let mut channels: Vec<[Vec<f64>; 4]> = Vec::with_capacity(order.len());
    for &k in order {
        let s = &subject.strides[k].samples;
        channels.push([
            s.iter().map(|x| x.theta_f).collect(),
            s.iter().map(|x| x.theta_s).collect(),
            s.iter().map(|x| x.p_f).collect(),
            s.iter().map(|x| x.p_u).collect(),
        ]);
    }

    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut last_seg = usize::MAX;
    for i in 0..count {
        let time = i as f64 / rate;
        while seg + 1 < order.len() && time >= seg_start + subject.strides[order[seg]].duration() {
            seg_start += subject.strides[order[seg]].duration();
            seg += 1;
        }
        let stride = &subject.strides[order[seg]];
        let first = &stride.samples[0];
        let rate_k = first.phase_rate;
        let phase = ((time - seg_start) * rate_k).clamp(0.0, 1.0 - f64::EPSILON);
        let u = phase * n;
        let [ft, sh, pf, pu] = &channels[seg];
        let (theta_f, dft) = catmull_rom(ft, u);
        let (theta_s, dsh) = catmull_rom(sh, u);
        let truth_phase = match truth_mode {
            PhaseTruth::ConstantRate => phase,
            PhaseTruth::Labels => {
                let k = u.floor() as usize;
                let f = u - k as f64;
                let a = stride.samples[k].phase;
                let b = stride.samples.get(k + 1).map_or(1.0, |s| s.phase);
                (a + f * (b - a)).min(1.0 - f64::EPSILON)
            }
        };
        samples.push(StreamSample {
            time,
            z: MeasurementVector {
                theta_f,
                theta_f_dot: dft * n * rate_k,
                theta_s,
                theta_s_dot: dsh * n * rate_k,
                p_f: catmull_rom(pf, u).0,
                p_u: catmull_rom(pu, u).0,
            },
            truth: GaitState {
                phase: truth_phase,
                phase_rate: rate_k,
                stride_length: first.stride_length,
                incline: first.incline,
            },
            heel_strike: seg != last_seg,
        });
        last_seg = seg;
    }
    Ok(LabeledStream {
        sample_rate: rate,
        leg_length: subject.leg_length,
        samples,
    })
}

/// Every stride of `subject`, in dataset order.
pub fn concatenate_subject(subject: &Subject, rate: f64, truth_mode: PhaseTruth) -> Result<LabeledStream> {
    let order: Vec<usize> = (0..subject.strides.len()).collect();
    concatenate_strides(subject, &order, rate, truth_mode)
}
