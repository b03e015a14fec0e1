//! Command-line front end for fitting, replay and the experiments.
//!
//! Exit codes: 0 on success, 2 for configuration and input errors, 3 for
//! numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gait_ekf::error::{Error, Result};
use gait_ekf::harness::config::{ExperimentConfig, Mode, NoisePreset, ScenarioKind};
use gait_ekf::harness::experiment::{
    run_ablation, run_crossval, run_fit, run_gen, run_replay, write_ablation, write_crossval, write_fit, write_gen,
    write_replay,
};
use gait_ekf::harness::report::{read_stride_rows, reaggregate, write_json};
use gait_ekf::harness::HeelStrikeMode;
use gait_ekf::simdata::PhaseTruth;

#[derive(Parser)]
#[command(name = "gait-ekf", version, about = "Gait state estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the gait model, covariance table and torque surface.
    Fit(FitArgs),
    /// Stream a scenario through the full estimator stack.
    Replay(Seeded),
    /// Leave-one-subject-out cross-validation against the timing baseline.
    Crossval(Seeded),
    /// Cross-validation with stride length and incline frozen.
    Ablation(Seeded),
    /// Generate a synthetic stride dataset and scenario stream.
    Gen(Seeded),
    /// Re-aggregate per-stride CSVs into a summary report.
    Report(ReportArgs),
}

#[derive(Args)]
struct Seeded {
    /// Root seed for every random stream.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FitArgs {
    /// Seed of the synthetic cohort; needed unless `--data` is given.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Default,
    Outdoor,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeelStrikeArg {
    Oracle,
    Detected,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseTruthArg {
    ConstantRate,
    Labels,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Steady,
    SpeedPulse,
    InclineRamp,
    InclineSteps,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON config; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stride dataset CSV; a synthetic cohort is generated otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    gait_model: Option<PathBuf>,
    #[arg(long)]
    torque_model: Option<PathBuf>,
    /// Harmonic order of the fitted models.
    #[arg(long)]
    order: Option<usize>,
    /// Synthetic cohort size.
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Process sigmas for phase rate, pseudo stride and incline.
    #[arg(long, num_args = 3, value_names = ["S22", "S33", "S44"])]
    process_sigma: Option<Vec<f64>>,
    /// Backup reset ratio.
    #[arg(long)]
    ratio: Option<f64>,
    /// Never reset the main filter from the backup.
    #[arg(long)]
    no_resets: bool,
    #[arg(long, value_enum)]
    heelstrike: Option<HeelStrikeArg>,
    #[arg(long, value_enum)]
    phase_truth: Option<PhaseTruthArg>,
    /// Strides skipped at the start of each stream.
    #[arg(long)]
    warmup: Option<usize>,
    /// Replay held-out streams without sensor noise.
    #[arg(long)]
    clean: bool,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Scenario sample rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Steady-scenario speed, m/s.
    #[arg(long)]
    speed: Option<f64>,
    /// Steady-scenario incline, degrees.
    #[arg(long)]
    incline: Option<f64>,
    /// Steady-scenario duration, s.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-stride CSVs written by crossval, ablation or replay.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = &self.gait_model {
            cfg.model.gait = Some(v.clone());
        }
        if let Some(v) = &self.torque_model {
            cfg.model.torque = Some(v.clone());
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = self.subjects {
            cfg.cohort.subjects = v;
        }
        if let Some(v) = self.preset {
            cfg.noise.preset = match v {
                PresetArg::Default => NoisePreset::Default,
                PresetArg::Outdoor => NoisePreset::Outdoor,
            };
        }
        if let Some(v) = &self.process_sigma {
            cfg.noise.process_sigma = Some([v[0], v[1], v[2]]);
        }
        if let Some(v) = self.ratio {
            cfg.backup.ratio = v;
        }
        if self.no_resets {
            cfg.backup.enabled = false;
        }
        if let Some(v) = self.heelstrike {
            cfg.heelstrike.mode = match v {
                HeelStrikeArg::Oracle => HeelStrikeMode::Oracle,
                HeelStrikeArg::Detected => HeelStrikeMode::Detected,
            };
        }
        if let Some(v) = self.phase_truth {
            cfg.evaluation.phase_truth = match v {
                PhaseTruthArg::ConstantRate => PhaseTruth::ConstantRate,
                PhaseTruthArg::Labels => PhaseTruth::Labels,
            };
        }
        if let Some(v) = self.warmup {
            cfg.evaluation.warmup_strides = v;
        }
        if self.clean {
            cfg.evaluation.sensor_noise = false;
            cfg.scenario.sensor_noise = false;
        }
        if let Some(v) = self.scenario {
            cfg.scenario.kind = match v {
                ScenarioArg::Steady => ScenarioKind::Steady,
                ScenarioArg::SpeedPulse => ScenarioKind::SpeedPulse,
                ScenarioArg::InclineRamp => ScenarioKind::InclineRamp,
                ScenarioArg::InclineSteps => ScenarioKind::InclineSteps,
            };
        }
        if let Some(v) = self.rate {
            cfg.scenario.sample_rate = v;
        }
        if let Some(v) = self.speed {
            cfg.scenario.speed = v;
        }
        if let Some(v) = self.incline {
            cfg.scenario.incline = v;
        }
        if let Some(v) = self.duration {
            cfg.scenario.duration = v;
        }
    }
}

/// Flags first, then the config file on top. `mode` is `None` for
/// commands that accept any experiment config.
fn resolve(mode: Option<Mode>, common: &Common, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(mode.unwrap_or_default());
    cfg.seed = seed;
    common.apply(&mut cfg);
    if let Some(path) = &common.config {
        cfg = cfg.merged_with_file(path)?;
    }
    if let Some(mode) = mode.filter(|m| *m != cfg.mode) {
        return Err(Error::Config(format!(
            "config file sets mode {} but the command is {}",
            cfg.mode.name(),
            mode.name()
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(f) => {
            let cfg = resolve(Some(Mode::Fit), &f.common, f.seed)?;
            let out = run_fit(&cfg)?;
            write_fit(&out, &cfg.output)?;
            println!(
                "fit: {} strides, constraint violation {:.2e}, flat-foot error {:.2e} -> {}",
                out.report.strides,
                out.report.constraint_violation,
                out.report.flat_foot_error,
                cfg.output.display()
            );
        }
        Command::Replay(s) => {
            let cfg = resolve(Some(Mode::Replay), &s.common, Some(s.seed))?;
            let out = run_replay(&cfg)?;
            write_replay(&out, &cfg.output)?;
            let r = &out.report;
            println!(
                "replay: {} strides, EKF phase {:.3}%, TBE phase {:.3}%, resets {}, p99 latency {} ns -> {}",
                r.strides,
                r.ekf.phase_pct,
                r.tbe.phase_pct,
                r.resets,
                r.latency.p99_ns,
                cfg.output.display()
            );
        }
        Command::Crossval(s) => {
            let cfg = resolve(Some(Mode::Crossval), &s.common, Some(s.seed))?;
            let out = run_crossval(&cfg)?;
            write_crossval(&out, &cfg.output)?;
            let r = &out.report;
            println!(
                "crossval: EKF phase {:.3} ± {:.3}%, TBE phase {:.3} ± {:.3}%, paired p = {:.3e} -> {}",
                r.ekf.phase_pct.mean,
                r.ekf.phase_pct.std,
                r.tbe.phase_pct.mean,
                r.tbe.phase_pct.std,
                r.ekf_vs_tbe.subjects.p,
                cfg.output.display()
            );
        }
        Command::Ablation(s) => {
            let cfg = resolve(Some(Mode::Ablation), &s.common, Some(s.seed))?;
            let out = run_ablation(&cfg)?;
            write_ablation(&out, &cfg.output)?;
            let r = &out.report;
            println!(
                "ablation: full phase {:.3}%, frozen phase {:.3}%, paired p = {:.3e}, frozen drift {:.1e} -> {}",
                r.full.phase_pct.mean,
                r.frozen.phase_pct.mean,
                r.frozen_vs_full.subjects.p,
                r.max_frozen_drift,
                cfg.output.display()
            );
        }
        Command::Gen(s) => {
            let cfg = resolve(None, &s.common, Some(s.seed))?;
            let out = run_gen(&cfg)?;
            write_gen(&out, &cfg.output)?;
            println!(
                "gen: {} subjects, {} strides, stream of {} samples -> {}",
                out.report.subjects,
                out.report.strides,
                out.report.stream_samples,
                cfg.output.display()
            );
        }
        Command::Report(a) => {
            let mut rows = Vec::new();
            for p in &a.inputs {
                rows.extend(read_stride_rows(p)?);
            }
            let sources = a.inputs.iter().map(|p| p.display().to_string()).collect();
            let agg = reaggregate(&rows, sources)?;
            std::fs::create_dir_all(&a.out)?;
            let path = a.out.join("aggregate_report.json");
            write_json(&path, &agg)?;
            for e in &agg.estimators {
                println!(
                    "{}: {} subjects, {} strides, phase {:.3} ± {:.3}%",
                    e.estimator, e.summary.subjects, e.summary.strides, e.summary.phase_pct.mean, e.summary.phase_pct.std
                );
            }
            println!("-> {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
