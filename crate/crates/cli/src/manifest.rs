//! Run manifests: enough to rerun a training job and check that its inputs
//! have not changed since.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kgec_core::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub status: Status,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub entailments: Option<PathBuf>,
    /// Every hyperparameter, as `key → value` strings.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputFile>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub best_epoch: Option<usize>,
    pub best_valid_mrr: Option<f64>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn absolute(path: &Path) -> anyhow::Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))
}

impl RunManifest {
    /// Hashes every input that exists: the three splits and the entailment
    /// file, if any.
    pub fn new(data_dir: &Path, entailments: Option<&Path>, config: &TrainConfig) -> anyhow::Result<Self> {
        let data_dir = absolute(data_dir)?;
        let mut inputs = Vec::new();
        for (role, path) in ["train", "valid", "test"]
            .into_iter()
            .zip(kgec_core::Dataset::split_paths(&data_dir))
        {
            if path.exists() {
                inputs.push(InputFile {
                    role: role.to_owned(),
                    sha256: sha256_file(&path)?,
                    path,
                });
            }
        }
        let entailments = entailments.map(absolute).transpose()?;
        if let Some(path) = &entailments {
            inputs.push(InputFile {
                role: "entailments".to_owned(),
                sha256: sha256_file(path)?,
                path: path.clone(),
            });
        }
        Ok(RunManifest {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            status: Status::Running,
            seed: config.seed,
            data_dir,
            entailments,
            config: config_map(config),
            inputs,
            outputs: BTreeMap::new(),
            best_epoch: None,
            best_valid_mrr: None,
        })
    }

    pub fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let text: String = self.config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        Ok(TrainConfig::from_kv(&text, Path::new(MANIFEST_FILE))?)
    }

    /// Recomputes every input hash and fails on the first mismatch.
    pub fn verify_inputs(&self) -> anyhow::Result<()> {
        for input in &self.inputs {
            let actual = sha256_file(&input.path)?;
            if actual != input.sha256 {
                bail!(
                    "{} ({}) changed since the run was recorded: sha256 {actual}, expected {}",
                    input.path.display(),
                    input.role,
                    input.sha256
                );
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn config_map(config: &TrainConfig) -> BTreeMap<String, String> {
    config
        .to_kv_string()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}
