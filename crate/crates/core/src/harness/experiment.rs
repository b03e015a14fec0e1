//! Experiment drivers: fitting, leave-one-out cross-validation, the
//! frozen-task-state ablation, scenario replay and data generation.
//!
//! Folds run in parallel and are collected in subject order, so reports
//! do not depend on scheduling. Every random stream is seeded from the
//! root seed and a fixed tag.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, AblationSource, ExperimentConfig, Mode, NoisePreset};
use super::metrics::{mean_metrics, stride_metrics, Estimate, MetricMeans, StrideErrors};
use super::report::{stride_rows, write_json, write_rows, Comparison, StrideRow, Summary};
use super::stack::{default_initial_state, percentile, run_stack, HeelStrikeMode, StackOptions, StackRun};
use crate::error::{Error, Result};
use crate::estimator::TaskStates;
use crate::gait_model::{
    build_constraints, fit_gait_model, residual_covariance_table, ConstraintSet, GaitState, Output,
    ParameterMatrix, FLAT_FOOT_PHASE,
};
use crate::model_file::{load_gait_model, load_torque_model, save_gait_model, save_torque_model, GaitModel};
use crate::simdata::{
    concatenate_subject, generate_cohort, generate_synthetic_stream, load_stride_dataset, reference_parameters,
    LabeledStream, PhaseTruth, ScenarioProfile, StrideDataset,
};
use crate::torque_model::{evaluate_torque, fit_torque_model, TorqueSurface};

/// Stride data plus, for synthetic cohorts, each subject's true model.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: StrideDataset,
    pub subject_models: Option<Vec<ParameterMatrix>>,
}

/// Load the configured dataset, or generate the synthetic cohort.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    match &cfg.data {
        Some(path) => Ok(PreparedData {
            dataset: load_stride_dataset(path)?,
            subject_models: None,
        }),
        None => {
            let seed = cfg.require_seed()?;
            let reference = reference_parameters(cfg.order)?;
            let mut cohort_cfg = cfg.cohort.clone();
            cohort_cfg.seed = derive_seed(seed, "cohort", 0);
            let cohort = generate_cohort(&reference, &cohort_cfg)?;
            Ok(PreparedData {
                dataset: cohort.dataset,
                subject_models: Some(cohort.subject_models),
            })
        }
    }
}

/// Fit the kinematic model and its residual covariance table.
pub fn fit_model(data: &StrideDataset, constraints: &ConstraintSet) -> Result<GaitModel> {
    let phi = fit_gait_model(data, constraints, constraints.order())?;
    let table = residual_covariance_table(data, &phi)?;
    Ok(GaitModel { phi, table })
}

fn torque_surface(data: &StrideDataset, order: usize) -> Result<Option<TorqueSurface>> {
    if data.has_torque() {
        fit_torque_model(data, order).map(Some)
    } else {
        Ok(None)
    }
}

fn require_subjects(data: &StrideDataset) -> Result<()> {
    let n = data.subject_count();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "leave-one-out needs at least 3 subjects, got {n}"
        )));
    }
    Ok(())
}

fn scored(strides: Vec<StrideErrors>, warmup: usize) -> Vec<StrideErrors> {
    strides.into_iter().skip(warmup).collect()
}

fn phases(strides: &[StrideErrors]) -> Vec<f64> {
    strides.iter().map(|s| s.phase_pct).collect()
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub order: usize,
    pub subjects: usize,
    pub strides: usize,
    pub samples: usize,
    pub constraint_rows: usize,
    /// max |A φ - b| over every output column.
    pub constraint_violation: f64,
    /// max |θf(0.2, l, r) - r| over a 5 x 5 grid of stride and incline.
    pub flat_foot_error: f64,
    /// Training RMSE of (θs, θf, pf, pu).
    pub output_rmse: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GaitModel,
    pub torque: Option<TorqueSurface>,
    pub report: FitReport,
}

/// Largest flat-foot violation over normalized strides 0.5..1.5 and
/// inclines -10..10.
pub fn flat_foot_error(phi: &ParameterMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let l = 0.5 + 0.25 * i as f64;
            let r = -10.0 + 5.0 * j as f64;
            let theta_f = phi.eval(FLAT_FOOT_PHASE, l, r).value[Output::FootAngle.index()];
            worst = worst.max((theta_f - r).abs());
        }
    }
    worst
}

fn training_rmse(data: &StrideDataset, model: &GaitModel, torque: Option<&TorqueSurface>) -> ([f64; 4], Option<f64>) {
    let mut sums = [0.0; 4];
    let mut tsum = 0.0;
    let mut n = 0usize;
    for subject in data.subjects() {
        for stride in &subject.strides {
            for s in &stride.samples {
                let g = GaitState::new(s.phase, s.phase_rate, s.stride_length, s.incline);
                let y = model.phi.evaluate(&g, subject.leg_length);
                for (k, truth) in s.outputs().iter().enumerate() {
                    sums[k] += (y[k] - truth).powi(2);
                }
                if let (Some(surface), Some(t)) = (torque, s.torque) {
                    tsum += (surface.raw(&g, subject.leg_length) - t / surface.scale()).powi(2);
                }
                n += 1;
            }
        }
    }
    let nf = n.max(1) as f64;
    (sums.map(|s| (s / nf).sqrt()), torque.map(|_| (tsum / nf).sqrt()))
}

pub fn run_fit(cfg: &ExperimentConfig) -> Result<FitOutcome> {
    let data = prepare_data(cfg)?.dataset;
    let constraints = build_constraints(cfg.order)?;
    let model = fit_model(&data, &constraints)?;
    let torque = torque_surface(&data, cfg.order)?;
    let (output_rmse, torque_rmse) = training_rmse(&data, &model, torque.as_ref());
    let report = FitReport {
        kind: "fit".into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        order: cfg.order,
        subjects: data.subject_count(),
        strides: data.stride_count(),
        samples: data.sample_count(),
        constraint_rows: constraints.total_rows(),
        constraint_violation: constraints.max_violation(&model.phi),
        flat_foot_error: flat_foot_error(&model.phi),
        output_rmse,
        torque_rmse,
    };
    Ok(FitOutcome { model, torque, report })
}

pub fn write_fit(out: &FitOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_gait_model(&dir.join("gait_model.json"), &out.model)?;
    if let Some(t) = &out.torque {
        save_torque_model(&dir.join("torque_model.json"), t)?;
    }
    write_json(&dir.join("fit_report.json"), &out.report)
}

// ----------------------------------------------------------- crossval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalFold {
    pub subject: String,
    pub leg_length: f64,
    pub samples: usize,
    pub ekf: MetricMeans,
    pub tbe: MetricMeans,
    pub backup: MetricMeans,
    pub resets: usize,
    pub heelstrikes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub heelstrike_mode: HeelStrikeMode,
    pub phase_truth: PhaseTruth,
    pub noise_preset: NoisePreset,
    pub resets_enabled: bool,
    pub warmup_strides: usize,
    pub folds: Vec<CrossvalFold>,
    pub ekf: Summary,
    pub tbe: Summary,
    pub backup: Summary,
    /// EKF minus TBE phase RMSE.
    pub ekf_vs_tbe: Comparison,
}

#[derive(Debug, Clone)]
pub struct CrossvalOutcome {
    pub report: CrossvalReport,
    pub strides: Vec<StrideRow>,
}

struct FoldStrides {
    fold: CrossvalFold,
    ekf: Vec<StrideErrors>,
    tbe: Vec<StrideErrors>,
    backup: Vec<StrideErrors>,
}

/// The held-out subject's strides back to back, optionally noisy.
fn held_out_stream(cfg: &ExperimentConfig, data: &StrideDataset, index: usize, seed: u64) -> Result<LabeledStream> {
    let subject = &data.subjects()[index];
    let mut stream = concatenate_subject(subject, cfg.evaluation.sample_rate, cfg.evaluation.phase_truth)?;
    if cfg.evaluation.sensor_noise {
        stream.add_noise(&cfg.noise.sensor_sigma, derive_seed(seed, "held-out-noise", index as u64));
    }
    Ok(stream)
}

fn crossval_fold(
    cfg: &ExperimentConfig,
    data: &StrideDataset,
    constraints: &ConstraintSet,
    torque: Option<&TorqueSurface>,
    index: usize,
    seed: u64,
) -> Result<FoldStrides> {
    let model = fit_model(&data.without_subject(index), constraints)?;
    let stream = held_out_stream(cfg, data, index, seed)?;
    let run = run_stack(&stream, &model.phi, &cfg.stack_options(model.table))?;
    let warmup = cfg.evaluation.warmup_strides;
    let ekf = scored(stride_metrics(&stream, &run.ekf, torque)?, warmup);
    let tbe = scored(stride_metrics(&stream, &run.tbe, None)?, warmup);
    let backup = scored(stride_metrics(&stream, &run.backup, torque)?, warmup);
    if ekf.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "subject {} has {} scored strides",
            data.subjects()[index].id,
            ekf.len()
        )));
    }
    let subject = &data.subjects()[index];
    Ok(FoldStrides {
        fold: CrossvalFold {
            subject: subject.id.clone(),
            leg_length: subject.leg_length,
            samples: stream.len(),
            ekf: mean_metrics(&ekf),
            tbe: mean_metrics(&tbe),
            backup: mean_metrics(&backup),
            resets: run.resets.len(),
            heelstrikes: run.heelstrikes.len(),
        },
        ekf,
        tbe,
        backup,
    })
}

/// Leave-one-subject-out: fit on the rest, replay the held-out subject
/// through the filter, the timing baseline and the backup.
pub fn run_crossval(cfg: &ExperimentConfig) -> Result<CrossvalOutcome> {
    let seed = cfg.require_seed()?;
    let prepared = prepare_data(cfg)?;
    let data = &prepared.dataset;
    require_subjects(data)?;
    let constraints = build_constraints(cfg.order)?;
    // the torque surface maps states to commands and is shared by every fold
    let torque = torque_surface(data, cfg.order)?;

    let folds = (0..data.subject_count())
        .into_par_iter()
        .map(|i| crossval_fold(cfg, data, &constraints, torque.as_ref(), i, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut strides = Vec::new();
    for f in &folds {
        strides.extend(stride_rows(&f.fold.subject, "ekf", &f.ekf));
        strides.extend(stride_rows(&f.fold.subject, "tbe", &f.tbe));
        strides.extend(stride_rows(&f.fold.subject, "backup", &f.backup));
    }
    let means = |pick: fn(&CrossvalFold) -> MetricMeans| folds.iter().map(|f| pick(&f.fold)).collect::<Vec<_>>();
    let ekf_means = means(|f| f.ekf);
    let tbe_means = means(|f| f.tbe);
    let ekf_vs_tbe = Comparison::phase(
        &ekf_means.iter().map(|m| m.phase_pct).collect::<Vec<_>>(),
        &tbe_means.iter().map(|m| m.phase_pct).collect::<Vec<_>>(),
        &folds.iter().flat_map(|f| phases(&f.ekf)).collect::<Vec<_>>(),
        &folds.iter().flat_map(|f| phases(&f.tbe)).collect::<Vec<_>>(),
    )?;
    let report = CrossvalReport {
        kind: Mode::Crossval.name().into(),
        config_hash: cfg.hash(),
        seed: Some(seed),
        heelstrike_mode: cfg.heelstrike.mode,
        phase_truth: cfg.evaluation.phase_truth,
        noise_preset: cfg.noise.preset,
        resets_enabled: cfg.backup.enabled,
        warmup_strides: cfg.evaluation.warmup_strides,
        ekf: Summary::of(&ekf_means),
        tbe: Summary::of(&tbe_means),
        backup: Summary::of(&means(|f| f.backup)),
        folds: folds.into_iter().map(|f| f.fold).collect(),
        ekf_vs_tbe,
    };
    Ok(CrossvalOutcome { report, strides })
}

pub fn write_crossval(out: &CrossvalOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("crossval_report.json"), &out.report)?;
    write_rows(&dir.join("crossval_strides.csv"), &out.strides)
}

// ----------------------------------------------------------- ablation

/// Largest excursion of the stride-length and incline estimates from
/// their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub stride_length: f64,
    pub incline: f64,
}

impl Drift {
    pub fn of(estimates: &[Estimate], initial: &GaitState) -> Self {
        let mut d = Self::default();
        for e in estimates {
            if let Some(l) = e.stride_length {
                d.stride_length = d.stride_length.max((l - initial.stride_length).abs());
            }
            if let Some(r) = e.incline {
                d.incline = d.incline.max((r - initial.incline).abs());
            }
        }
        d
    }

    pub fn max(&self) -> f64 {
        self.stride_length.max(self.incline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFold {
    pub subject: String,
    pub full: MetricMeans,
    pub frozen: MetricMeans,
    pub full_resets: usize,
    pub frozen_resets: usize,
    pub frozen_drift: Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub source: AblationSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioProfile>,
    pub noise_preset: NoisePreset,
    pub resets_enabled: bool,
    pub warmup_strides: usize,
    pub folds: Vec<AblationFold>,
    pub full: Summary,
    pub frozen: Summary,
    /// Frozen minus full phase RMSE.
    pub frozen_vs_full: Comparison,
    pub max_frozen_drift: f64,
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub report: AblationReport,
    pub strides: Vec<StrideRow>,
}

struct AblationStrides {
    fold: AblationFold,
    full: Vec<StrideErrors>,
    frozen: Vec<StrideErrors>,
}

fn ablation_stream(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    constraints: &ConstraintSet,
    index: usize,
    seed: u64,
) -> Result<LabeledStream> {
    let data = &prepared.dataset;
    match cfg.ablation.source {
        AblationSource::HeldOutStrides => held_out_stream(cfg, data, index, seed),
        AblationSource::Scenario => {
            let subject = &data.subjects()[index];
            let truth = match &prepared.subject_models {
                Some(models) => models[index].clone(),
                None => fit_gait_model(&data.only_subject(index), constraints, cfg.order)?,
            };
            let mut profile = cfg
                .ablation
                .scenario
                .profile(cfg.noise.sensor_sigma, derive_seed(seed, "ablation-scenario", index as u64));
            profile.leg_length = subject.leg_length;
            generate_synthetic_stream(&profile, &truth)
        }
    }
}

fn ablation_fold(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    constraints: &ConstraintSet,
    index: usize,
    seed: u64,
) -> Result<AblationStrides> {
    let data = &prepared.dataset;
    let model = fit_model(&data.without_subject(index), constraints)?;
    let stream = ablation_stream(cfg, prepared, constraints, index, seed)?;
    let full_opts = cfg.stack_options(model.table);
    let mut frozen_opts = full_opts.clone();
    frozen_opts.noise = frozen_opts.noise.with_task_states(TaskStates::Frozen);
    let full = run_stack(&stream, &model.phi, &full_opts)?;
    let frozen = run_stack(&stream, &model.phi, &frozen_opts)?;
    let warmup = cfg.evaluation.warmup_strides;
    let full_strides = scored(stride_metrics(&stream, &full.ekf, None)?, warmup);
    let frozen_strides = scored(stride_metrics(&stream, &frozen.ekf, None)?, warmup);
    if full_strides.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "subject {} has {} scored strides",
            data.subjects()[index].id,
            full_strides.len()
        )));
    }
    let initial = default_initial_state(stream.leg_length);
    Ok(AblationStrides {
        fold: AblationFold {
            subject: data.subjects()[index].id.clone(),
            full: mean_metrics(&full_strides),
            frozen: mean_metrics(&frozen_strides),
            full_resets: full.resets.len(),
            frozen_resets: frozen.resets.len(),
            frozen_drift: Drift::of(&frozen.ekf, &initial),
        },
        full: full_strides,
        frozen: frozen_strides,
    })
}

/// Cross-validation with and without stride-length and incline
/// estimation; the frozen arm starts both at the default guess with
/// negligible variance so they cannot adapt.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<AblationOutcome> {
    let seed = cfg.require_seed()?;
    let prepared = prepare_data(cfg)?;
    require_subjects(&prepared.dataset)?;
    let constraints = build_constraints(cfg.order)?;

    let folds = (0..prepared.dataset.subject_count())
        .into_par_iter()
        .map(|i| ablation_fold(cfg, &prepared, &constraints, i, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut strides = Vec::new();
    for f in &folds {
        strides.extend(stride_rows(&f.fold.subject, "full", &f.full));
        strides.extend(stride_rows(&f.fold.subject, "frozen", &f.frozen));
    }
    let full_means: Vec<MetricMeans> = folds.iter().map(|f| f.fold.full).collect();
    let frozen_means: Vec<MetricMeans> = folds.iter().map(|f| f.fold.frozen).collect();
    let frozen_vs_full = Comparison::phase(
        &frozen_means.iter().map(|m| m.phase_pct).collect::<Vec<_>>(),
        &full_means.iter().map(|m| m.phase_pct).collect::<Vec<_>>(),
        &folds.iter().flat_map(|f| phases(&f.frozen)).collect::<Vec<_>>(),
        &folds.iter().flat_map(|f| phases(&f.full)).collect::<Vec<_>>(),
    )?;
    let max_frozen_drift = folds.iter().map(|f| f.fold.frozen_drift.max()).fold(0.0, f64::max);
    let scenario = (cfg.ablation.source == AblationSource::Scenario)
        .then(|| cfg.ablation.scenario.profile(cfg.noise.sensor_sigma, 0));
    let report = AblationReport {
        kind: Mode::Ablation.name().into(),
        config_hash: cfg.hash(),
        seed: Some(seed),
        source: cfg.ablation.source,
        scenario,
        noise_preset: cfg.noise.preset,
        resets_enabled: cfg.backup.enabled,
        warmup_strides: cfg.evaluation.warmup_strides,
        full: Summary::of(&full_means),
        frozen: Summary::of(&frozen_means),
        folds: folds.into_iter().map(|f| f.fold).collect(),
        frozen_vs_full,
        max_frozen_drift,
    };
    Ok(AblationOutcome { report, strides })
}

pub fn write_ablation(out: &AblationOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("ablation_report.json"), &out.report)?;
    write_rows(&dir.join("ablation_strides.csv"), &out.strides)
}

// ------------------------------------------------------------- replay

/// Wall-clock cost of one full-stack step, nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl LatencyStats {
    pub fn of(latencies: &[u64]) -> Self {
        let n = latencies.len();
        Self {
            samples: n,
            mean_ns: latencies.iter().map(|v| *v as f64).sum::<f64>() / n.max(1) as f64,
            p50_ns: percentile(latencies, 0.5),
            p99_ns: percentile(latencies, 0.99),
            max_ns: latencies.iter().copied().max().unwrap_or(0),
        }
    }
}

/// One replayed sample: truth, every estimator and the torque command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySample {
    pub time_s: f64,
    pub true_phase: f64,
    pub true_phase_rate: f64,
    pub true_stride_length_m: f64,
    pub true_incline_deg: f64,
    pub ekf_phase: f64,
    pub ekf_phase_rate: f64,
    pub ekf_stride_length_m: f64,
    pub ekf_incline_deg: f64,
    pub tbe_phase: f64,
    pub tbe_phase_rate: f64,
    pub backup_phase: f64,
    pub backup_phase_rate: f64,
    pub backup_stride_length_m: f64,
    pub backup_incline_deg: f64,
    pub torque_command: Option<f64>,
    pub torque_truth: Option<f64>,
    pub true_heel_strike: bool,
    pub heel_strike_used: bool,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub scenario: ScenarioProfile,
    pub heelstrike_mode: HeelStrikeMode,
    pub noise_preset: NoisePreset,
    pub resets_enabled: bool,
    pub warmup_strides: usize,
    pub strides: usize,
    pub ekf: MetricMeans,
    pub tbe: MetricMeans,
    pub backup: MetricMeans,
    pub resets: usize,
    pub heelstrikes: usize,
    pub latency: LatencyStats,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: ReplayReport,
    pub samples: Vec<ReplaySample>,
    pub strides: Vec<StrideRow>,
    pub stream: LabeledStream,
}

fn replay_samples(stream: &LabeledStream, run: &StackRun, torque: Option<&TorqueSurface>) -> Vec<ReplaySample> {
    let mut used = vec![false; stream.len()];
    let mut k = 0;
    for (i, s) in stream.samples.iter().enumerate() {
        while k < run.heelstrikes.timestamps.len() && run.heelstrikes.timestamps[k] <= s.time {
            if run.heelstrikes.timestamps[k] == s.time {
                used[i] = true;
            }
            k += 1;
        }
    }
    let mut resets = vec![false; stream.len()];
    for &i in &run.resets {
        resets[i] = true;
    }
    let leg = stream.leg_length;
    stream
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let e = &run.ekf[i];
            let b = &run.backup[i];
            let est = GaitState::new(e.phase, e.phase_rate, e.stride_length.unwrap_or(0.0), e.incline.unwrap_or(0.0));
            ReplaySample {
                time_s: s.time,
                true_phase: s.truth.phase,
                true_phase_rate: s.truth.phase_rate,
                true_stride_length_m: s.truth.stride_length,
                true_incline_deg: s.truth.incline,
                ekf_phase: e.phase,
                ekf_phase_rate: e.phase_rate,
                ekf_stride_length_m: est.stride_length,
                ekf_incline_deg: est.incline,
                tbe_phase: run.tbe[i].phase,
                tbe_phase_rate: run.tbe[i].phase_rate,
                backup_phase: b.phase,
                backup_phase_rate: b.phase_rate,
                backup_stride_length_m: b.stride_length.unwrap_or(0.0),
                backup_incline_deg: b.incline.unwrap_or(0.0),
                torque_command: torque.map(|t| evaluate_torque(t, &est, leg)),
                torque_truth: torque.map(|t| evaluate_torque(t, &s.truth, leg)),
                true_heel_strike: s.heel_strike,
                heel_strike_used: used[i],
                reset: resets[i],
            }
        })
        .collect()
}

/// Tracking model and torque surface for a replay: loaded from the
/// configured files, otherwise fitted on the prepared data.
fn replay_models(cfg: &ExperimentConfig) -> Result<(GaitModel, Option<TorqueSurface>)> {
    let gait = cfg.model.gait.as_deref().map(load_gait_model).transpose()?;
    let torque = cfg.model.torque.as_deref().map(load_torque_model).transpose()?;
    if let (Some(g), Some(t)) = (&gait, &torque) {
        return Ok((g.clone(), Some(t.clone())));
    }
    let data = prepare_data(cfg)?.dataset;
    let gait = match gait {
        Some(g) => g,
        None => fit_model(&data, &build_constraints(cfg.order)?)?,
    };
    let torque = match torque {
        Some(t) => Some(t),
        None => torque_surface(&data, cfg.order)?,
    };
    Ok((gait, torque))
}

/// Stream a scenario generated from the reference model through the full
/// stack in real-time order.
pub fn run_replay(cfg: &ExperimentConfig) -> Result<ReplayOutcome> {
    let seed = cfg.require_seed()?;
    let (model, torque) = replay_models(cfg)?;
    let profile = cfg.scenario.profile(cfg.noise.sensor_sigma, derive_seed(seed, "replay", 0));
    let stream = generate_synthetic_stream(&profile, &reference_parameters(model.phi.order())?)?;
    let mut opts: StackOptions = cfg.stack_options(model.table.clone());
    opts.measure_latency = true;
    let run = run_stack(&stream, &model.phi, &opts)?;

    let warmup = cfg.evaluation.warmup_strides;
    let ekf = scored(stride_metrics(&stream, &run.ekf, torque.as_ref())?, warmup);
    let tbe = scored(stride_metrics(&stream, &run.tbe, None)?, warmup);
    let backup = scored(stride_metrics(&stream, &run.backup, torque.as_ref())?, warmup);
    let mut strides = stride_rows("scenario", "ekf", &ekf);
    strides.extend(stride_rows("scenario", "tbe", &tbe));
    strides.extend(stride_rows("scenario", "backup", &backup));
    let report = ReplayReport {
        kind: Mode::Replay.name().into(),
        config_hash: cfg.hash(),
        seed: Some(seed),
        scenario: profile,
        heelstrike_mode: cfg.heelstrike.mode,
        noise_preset: cfg.noise.preset,
        resets_enabled: cfg.backup.enabled,
        warmup_strides: warmup,
        strides: ekf.len(),
        ekf: mean_metrics(&ekf),
        tbe: mean_metrics(&tbe),
        backup: mean_metrics(&backup),
        resets: run.resets.len(),
        heelstrikes: run.heelstrikes.len(),
        latency: LatencyStats::of(&run.latencies_ns),
    };
    let samples = replay_samples(&stream, &run, torque.as_ref());
    Ok(ReplayOutcome {
        report,
        samples,
        strides,
        stream,
    })
}

pub fn write_replay(out: &ReplayOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("replay_report.json"), &out.report)?;
    write_rows(&dir.join("replay_samples.csv"), &out.samples)?;
    write_rows(&dir.join("replay_strides.csv"), &out.strides)
}

// ---------------------------------------------------------------- gen

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub subjects: usize,
    pub strides: usize,
    pub samples: usize,
    pub scenario: ScenarioProfile,
    pub stream_samples: usize,
    pub stream_strides: usize,
}

#[derive(Debug, Clone)]
pub struct GenOutcome {
    pub dataset: StrideDataset,
    pub stream: LabeledStream,
    pub report: GenReport,
}

/// Synthesize the stride cohort and one labeled scenario stream.
pub fn run_gen(cfg: &ExperimentConfig) -> Result<GenOutcome> {
    let seed = cfg.require_seed()?;
    let mut no_file = cfg.clone();
    no_file.data = None;
    let dataset = prepare_data(&no_file)?.dataset;
    let profile = cfg.scenario.profile(cfg.noise.sensor_sigma, derive_seed(seed, "gen-stream", 0));
    let stream = generate_synthetic_stream(&profile, &reference_parameters(cfg.order)?)?;
    let report = GenReport {
        kind: "gen".into(),
        config_hash: cfg.hash(),
        seed,
        subjects: dataset.subject_count(),
        strides: dataset.stride_count(),
        samples: dataset.sample_count(),
        scenario: profile,
        stream_samples: stream.len(),
        stream_strides: stream.stride_count(),
    };
    Ok(GenOutcome { dataset, stream, report })
}

pub fn write_gen(out: &GenOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    out.dataset.save(&dir.join("strides.csv"))?;
    out.stream.save(&dir.join("stream.csv"))?;
    write_json(&dir.join("gen_report.json"), &out.report)
}
