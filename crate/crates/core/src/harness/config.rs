//! Experiment configuration.
//!
//! Command-line flags produce a base configuration; a TOML or JSON config
//! file is then deep-merged over it, so values in the file win. Every
//! report embeds the SHA-256 of the final configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::stack::{HeelStrikeMode, StackOptions};
use crate::baseline::{HeelStrikeConfig, DEFAULT_RESET_RATIO};
use crate::error::{Error, Result};
use crate::estimator::{NoiseConfig, DEFAULT_PROCESS_SIGMA, DEFAULT_SENSOR_SIGMA, OUTDOOR_PROCESS_SIGMA};
use crate::gait_model::{CovarianceTable, DEFAULT_ORDER};
use crate::simdata::{CohortConfig, PhaseTruth, ScenarioProfile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fit,
    Replay,
    #[default]
    Crossval,
    Ablation,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fit => "fit",
            Mode::Replay => "replay",
            Mode::Crossval => "crossval",
            Mode::Ablation => "ablation",
        }
    }
}

/// Process-noise tuning preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePreset {
    /// Slow, smooth task-state adaptation.
    #[default]
    Default,
    /// Faster response for changing terrain and speed.
    Outdoor,
}

impl NoisePreset {
    pub fn process_sigma(self) -> [f64; 3] {
        match self {
            NoisePreset::Default => DEFAULT_PROCESS_SIGMA,
            NoisePreset::Outdoor => OUTDOOR_PROCESS_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub preset: NoisePreset,
    /// Overrides the preset's `(σ22, σ33, σ44)` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_sigma: Option<[f64; 3]>,
    /// Constant sensor standard deviations added to the residual table.
    pub sensor_sigma: [f64; 6],
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            preset: NoisePreset::Default,
            process_sigma: None,
            sensor_sigma: DEFAULT_SENSOR_SIGMA,
        }
    }
}

impl NoiseSettings {
    pub fn process(&self) -> [f64; 3] {
        self.process_sigma.unwrap_or(self.preset.process_sigma())
    }

    pub fn build(&self, table: CovarianceTable) -> NoiseConfig {
        NoiseConfig::new(table)
            .with_process_sigma(self.process())
            .with_sensor_sigma(self.sensor_sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackupSettings {
    /// Whether the backup may reset the main filter.
    pub enabled: bool,
    /// Reset when the backup's stride SSR is below `ratio` times the main
    /// filter's.
    pub ratio: f64,
}

impl Default for BackupSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            ratio: DEFAULT_RESET_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeelStrikeSettings {
    pub mode: HeelStrikeMode,
    pub detector: HeelStrikeConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Steady,
    SpeedPulse,
    InclineRamp,
    InclineSteps,
}

/// A synthetic walking scenario; `speed`, `incline` and `duration` apply
/// to the steady kind only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub sample_rate: f64,
    pub speed: f64,
    pub incline: f64,
    pub duration: f64,
    pub leg_length: f64,
    /// Relative per-stride jitter of the truth model's outputs.
    pub subject_jitter: f64,
    /// Add sensor noise at `noise.sensor_sigma`.
    pub sensor_noise: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Steady,
            sample_rate: 100.0,
            speed: 1.0,
            incline: 0.0,
            duration: 60.0,
            leg_length: 0.9,
            subject_jitter: 0.0,
            sensor_noise: true,
        }
    }
}

impl ScenarioConfig {
    pub fn incline_ramp() -> Self {
        Self {
            kind: ScenarioKind::InclineRamp,
            ..Self::default()
        }
    }

    pub fn profile(&self, sensor_sigma: [f64; 6], seed: u64) -> ScenarioProfile {
        let rate = self.sample_rate;
        let mut p = match self.kind {
            ScenarioKind::Steady => ScenarioProfile::steady(self.speed, self.incline, self.duration, rate, seed),
            ScenarioKind::SpeedPulse => ScenarioProfile::speed_pulse(rate, seed),
            ScenarioKind::InclineRamp => ScenarioProfile::incline_ramp(rate, seed),
            ScenarioKind::InclineSteps => ScenarioProfile::incline_steps(rate, seed),
        };
        p.leg_length = self.leg_length;
        p.subject_jitter = self.subject_jitter;
        if self.sensor_noise {
            p = p.with_noise(sensor_sigma);
        }
        p
    }
}

/// How held-out subjects are replayed in cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Sample rate of the concatenated held-out stream, Hz.
    pub sample_rate: f64,
    pub phase_truth: PhaseTruth,
    /// Add sensor noise at `noise.sensor_sigma`.
    pub sensor_noise: bool,
    /// Strides at the start of each stream left out of the metrics.
    pub warmup_strides: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            sample_rate: 100.0,
            phase_truth: PhaseTruth::ConstantRate,
            sensor_noise: true,
            warmup_strides: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationSource {
    /// The held-out subject's concatenated strides.
    HeldOutStrides,
    /// A scenario generated from the held-out subject's own model.
    #[default]
    Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    pub source: AblationSource,
    pub scenario: ScenarioConfig,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            source: AblationSource::Scenario,
            scenario: ScenarioConfig::incline_ramp(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gait: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Root seed; every random stream is derived from it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Harmonic order of the gait and torque models.
    pub order: usize,
    /// Stride dataset CSV; a synthetic cohort is generated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub model: ModelPaths,
    pub cohort: CohortConfig,
    pub scenario: ScenarioConfig,
    pub noise: NoiseSettings,
    pub backup: BackupSettings,
    pub heelstrike: HeelStrikeSettings,
    pub evaluation: EvaluationSettings,
    pub ablation: AblationSettings,
    /// Output directory.
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Crossval,
            seed: None,
            order: DEFAULT_ORDER,
            data: None,
            model: ModelPaths::default(),
            cohort: CohortConfig::default(),
            scenario: ScenarioConfig::default(),
            noise: NoiseSettings::default(),
            backup: BackupSettings::default(),
            heelstrike: HeelStrikeSettings::default(),
            evaluation: EvaluationSettings::default(),
            ablation: AblationSettings::default(),
            output: PathBuf::from("out"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn existing(name: &str, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) if !p.is_file() => Err(Error::Config(format!("{name} file {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// The seed, or a config error for commands that need one.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("{} needs a seed", self.mode.name())))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.noise.process().iter().enumerate() {
            positive(&format!("process sigma {}", i + 2), *s)?;
        }
        for (i, s) in self.noise.sensor_sigma.iter().enumerate() {
            positive(&format!("sensor sigma {i}"), *s)?;
        }
        if self.order == 0 {
            return Err(Error::Config("model order must be at least 1".into()));
        }
        if !(self.backup.ratio > 0.0 && self.backup.ratio <= 1.0) {
            return Err(Error::Config(format!(
                "backup ratio must lie in (0, 1], got {}",
                self.backup.ratio
            )));
        }
        positive("evaluation sample rate", self.evaluation.sample_rate)?;
        for (name, s) in [("scenario", &self.scenario), ("ablation scenario", &self.ablation.scenario)] {
            positive(&format!("{name} sample rate"), s.sample_rate)?;
            positive(&format!("{name} duration"), s.duration)?;
            positive(&format!("{name} leg length"), s.leg_length)?;
            positive(&format!("{name} speed"), s.speed)?;
        }
        self.heelstrike.detector.validate()?;
        self.cohort.validate()?;
        existing("data", &self.data)?;
        existing("gait model", &self.model.gait)?;
        existing("torque model", &self.model.torque)?;
        Ok(())
    }

    /// Stack options for the configured noise, backup and detector.
    pub fn stack_options(&self, table: CovarianceTable) -> StackOptions {
        let mut opts = StackOptions::new(self.noise.build(table));
        opts.resets_enabled = self.backup.enabled;
        opts.reset_ratio = self.backup.ratio;
        opts.heelstrike_mode = self.heelstrike.mode;
        opts.heelstrike = self.heelstrike.detector;
        opts
    }

    /// Hex SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Deep-merge the file at `path` over `self`. Files ending in `.json`
    /// are read as JSON, anything else as TOML.
    pub fn merged_with_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let overlay: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            let t: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(t)?
        };
        self.merged_with(overlay)
    }

    pub fn merged_with(&self, overlay: Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Recursive object merge; non-object values in `overlay` replace.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Independent child seed for a named stream.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
