//! Run configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qnn_bench::circuits::{GradientMethod, Task};
use qnn_bench::experiment::{AttackProtocol, Profile};
use qnn_bench::fnn::fnn_config;
use qnn_bench::robustness::{BoundOptions, NoiseParams, SensitivityProtocol};
use qnn_bench::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Emnist,
    Lcei,
    /// Classical baseline on the EMNIST images.
    Fnn,
}

impl TaskKind {
    pub fn quantum(self) -> Option<Task> {
        match self {
            TaskKind::Emnist => Some(Task::Emnist),
            TaskKind::Lcei => Some(Task::Lcei),
            TaskKind::Fnn => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding the EMNIST-letters training IDX files.
    pub emnist_dir: PathBuf,
    /// Use procedurally drawn Q/T glyphs instead of EMNIST.
    pub synthetic: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            emnist_dir: PathBuf::from("data/emnist"),
            synthetic: false,
        }
    }
}

/// Overrides of the per-task training preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversarialConfig {
    pub epochs: usize,
    /// Fraction of each batch taken from the adversarial set.
    pub mix: f64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            mix: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Evaluation samples that get full upper-bound extraction.
    pub bound_samples: usize,
    /// Fraction of lowest-R_LB samples treated as critical.
    pub critical_fraction: f64,
    /// Artifact directory of a finished `fnn` run to compare against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnn_artifacts: Option<PathBuf>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            bound_samples: 40,
            critical_fraction: 0.2,
            fnn_artifacts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: TaskKind,
    pub profile: Profile,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub train: TrainOverrides,
    pub adversarial: AdversarialConfig,
    pub attack: AttackProtocol,
    pub sensitivity: SensitivityProtocol,
    pub bounds: BoundOptions,
    pub noise: NoiseParams,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Lcei,
            profile: Profile::Desk12q,
            seed: 0,
            out: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            train: TrainOverrides::default(),
            adversarial: AdversarialConfig::default(),
            attack: AttackProtocol::default(),
            sensitivity: SensitivityProtocol::default(),
            bounds: BoundOptions::default(),
            noise: NoiseParams::default(),
            report: ReportConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML, reporting the path of the offending field on error.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!(
                "invalid config {}: at `{}`: {}",
                origin.display(),
                path,
                e.into_inner().message()
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        self.noise.validate()?;
        self.train_config().validate()?;
        self.adversarial_config().validate()?;
        anyhow::ensure!(
            self.report.critical_fraction > 0.0 && self.report.critical_fraction <= 1.0,
            "report.critical_fraction must lie in (0, 1]"
        );
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = match self.task.quantum() {
            Some(task) => self.profile.train_config(task, self.seed),
            None => fnn_config(self.seed),
        };
        let o = &self.train;
        cfg.epochs = o.epochs.unwrap_or(cfg.epochs);
        cfg.batch_size = o.batch_size.unwrap_or(cfg.batch_size);
        cfg.lr = o.lr.unwrap_or(cfg.lr);
        cfg.gradient = o.gradient.unwrap_or(cfg.gradient);
        cfg
    }

    pub fn adversarial_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.adversarial.epochs,
            adversarial_mix: self.adversarial.mix,
            ..self.train_config()
        }
    }
}
