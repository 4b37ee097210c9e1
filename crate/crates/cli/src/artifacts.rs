//! File layout of a run directory, the manifest, and table writers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const DATASET: &str = "dataset.json";
pub const MODEL: &str = "model.json";
pub const MODEL_ADV: &str = "model_adv.json";
pub const TRAIN_STATE: &str = "train_state.json";
pub const HISTORY: &str = "history.csv";
pub const HISTORY_ADV: &str = "history_adv.csv";
pub const TARGETS: &str = "targets.json";
pub const ADVERSARIAL: &str = "adversarial.json";
pub const CURVES: &str = "curves.csv";
pub const CURVE_SAMPLES: &str = "curve_samples.csv";
pub const G_CURVE: &str = "g_curve.csv";
pub const SENSITIVITY: &str = "sensitivity.csv";
pub const SENSITIVITY_JSON: &str = "sensitivity.json";
pub const BOUNDS: &str = "bounds.csv";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fails with the full list of missing `names` under `dir`.
pub fn require(dir: &Path, names: &[&str], hint: &str) -> Result<()> {
    let missing: Vec<String> = names
        .iter()
        .filter(|n| !dir.join(n).is_file())
        .map(|n| dir.join(n).display().to_string())
        .collect();
    anyhow::ensure!(
        missing.is_empty(),
        "missing required inputs in {}:\n  {}\n{hint}",
        dir.display(),
        missing.join("\n  ")
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Resolved configuration plus content digests of every stage's files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn digests(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| Ok((n.to_string(), sha256_file(&self.path(n))?)))
            .collect()
    }

    /// Records a finished stage and rewrites the manifest and resolved config.
    pub fn record(
        &self,
        cfg: &RunConfig,
        stage: &str,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<()> {
        let path = self.path(MANIFEST);
        let mut manifest = match std::fs::read(&path) {
            Ok(bytes) => {
                let m: Manifest = serde_json::from_slice(&bytes)
                    .with_context(|| format!("parsing {}", path.display()))?;
                if m.config != *cfg {
                    log::warn!(
                        "configuration differs from the previous stage; earlier stages dropped"
                    );
                    Manifest {
                        config: cfg.clone(),
                        stages: BTreeMap::new(),
                        ..m
                    }
                } else {
                    m
                }
            }
            Err(_) => Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: cfg.clone(),
                stages: BTreeMap::new(),
            },
        };
        manifest.stages.insert(
            stage.into(),
            StageRecord {
                seed: cfg.seed,
                inputs: self.digests(inputs)?,
                outputs: self.digests(outputs)?,
            },
        );
        write_json(&path, &manifest)?;
        std::fs::write(self.path(CONFIG), cfg.to_toml()?)?;
        Ok(())
    }
}
