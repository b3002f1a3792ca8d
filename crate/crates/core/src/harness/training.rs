//! Classifier training from a labelled corpus, on clean audio or on audio
//! played through the power-line channel.
//!
//! ```toml
//! corpus = "data/digits"
//! output = "runs/model"
//! channel_devices = ["all"]
//!
//! [train]
//! epochs = 12
//! seed = 3
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::resolve_devices;
use super::trials::{examples, FeatureSource};
use super::{HarnessError, TOOL_VERSION};
use crate::channel::ProfileRegistry;
use crate::classifier::checkpoint::hex;
use crate::classifier::train::EpochStats;
use crate::classifier::{load_corpus, save_checkpoint, train, CnnModel, TrainConfig, TrainReport};
use crate::denoise::DenoiseConfig;

pub const CHECKPOINT_NAME: &str = "model.bin";
pub const LOG_NAME: &str = "train_log.csv";

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn full() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub corpus: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub limit: Option<usize>,
    /// Devices whose channel the training audio passes through, in
    /// rotation. Empty trains on the corpus audio itself.
    #[serde(default)]
    pub channel_devices: Vec<String>,
    #[serde(default = "full")]
    pub channel_volume: f64,
    #[serde(default = "yes")]
    pub firmware_noise: bool,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub denoise: DenoiseConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl TrainSpec {
    pub fn new(corpus: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            output: default_output(),
            limit: None,
            channel_devices: Vec::new(),
            channel_volume: 1.0,
            firmware_noise: true,
            profiles: None,
            denoise: DenoiseConfig::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: Self = toml::from_str(&text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.corpus.as_os_str().is_empty() {
            return Err(HarnessError::Invalid("corpus path is empty".into()));
        }
        if self.limit == Some(0) {
            return Err(HarnessError::Invalid("limit must be positive".into()));
        }
        if !(self.channel_volume > 0.0 && self.channel_volume <= 1.0) {
            return Err(HarnessError::Invalid(format!(
                "volume {} outside (0, 1]",
                self.channel_volume
            )));
        }
        self.train.validate()?;
        Ok(())
    }

    /// Output directory excluded.
    pub fn config_hash(&self) -> String {
        let mut spec = self.clone();
        spec.output = PathBuf::new();
        let json = serde_json::to_string(&spec).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn source(&self) -> Result<FeatureSource, HarnessError> {
        if self.channel_devices.is_empty() {
            return Ok(FeatureSource::Clean);
        }
        let registry = match &self.profiles {
            Some(p) => ProfileRegistry::load(p)?,
            None => ProfileRegistry::builtin(),
        };
        Ok(FeatureSource::Channel {
            devices: resolve_devices(&self.channel_devices, &registry)?,
            volume: self.channel_volume,
            seed: self.train.seed,
            firmware_noise: self.firmware_noise,
            denoise: self.denoise,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel,
    pub report: TrainReport,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    /// SHA-256 of the checkpoint bytes.
    pub sha256: String,
}

pub fn render_log(spec: &TrainSpec, report: &TrainReport) -> String {
    let mut s = format!(
        "# tool: powerleak {TOOL_VERSION}\n# kind: train\n# seed: {}\n# config_sha256: {}\n# train_size: {}\n# validation_size: {}\n",
        spec.train.seed,
        spec.config_hash(),
        report.train_size,
        report.validation_size
    );
    s.push_str("epoch,loss,train_accuracy,validation_accuracy\n");
    for e in &report.epochs {
        s.push_str(&log_line(e));
    }
    s
}

fn log_line(e: &EpochStats) -> String {
    let val = e.validation_accuracy.map(|v| v.to_string()).unwrap_or_default();
    format!("{},{},{},{val}\n", e.epoch, e.loss, e.train_accuracy)
}

/// Featurizes the corpus, trains, and writes the checkpoint, its sidecar and
/// the epoch log into `spec.output`.
pub fn run_training(spec: &TrainSpec) -> Result<TrainOutcome, HarnessError> {
    spec.validate()?;
    let mut corpus = load_corpus(&spec.corpus)?;
    if let Some(l) = spec.limit {
        corpus.truncate(l);
    }
    if corpus.is_empty() {
        return Err(HarnessError::Invalid(format!(
            "no .wav files in {}",
            spec.corpus.display()
        )));
    }
    let data = examples(&corpus, &spec.source()?)?;
    let (model, report) = train(&data, &spec.train)?;

    let dir = &spec.output;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.clone(),
        source,
    })?;
    let checkpoint = dir.join(CHECKPOINT_NAME);
    let notes = serde_json::json!({
        "tool": format!("powerleak {TOOL_VERSION}"),
        "config_sha256": spec.config_hash(),
        "train": spec.train,
        "channel_devices": spec.channel_devices,
        "corpus_size": corpus.len(),
    });
    let meta = save_checkpoint(&model, &checkpoint, notes)?;
    let log = dir.join(LOG_NAME);
    fs::write(&log, render_log(spec, &report)).map_err(|source| HarnessError::Io {
        path: log.clone(),
        source,
    })?;
    Ok(TrainOutcome {
        model,
        report,
        checkpoint,
        log,
        sha256: meta.sha256,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_train_table_takes_defaults() {
        let s: TrainSpec = toml::from_str("corpus = \"c\"\n[train]\nepochs = 2\n").unwrap();
        assert_eq!(s.train.epochs, 2);
        assert_eq!(s.train.batch_size, TrainConfig::default().batch_size);
        assert!(s.channel_devices.is_empty());
        assert_eq!(s.source().unwrap(), FeatureSource::Clean);
        s.validate().unwrap();
    }

    #[test]
    fn bad_specs_are_validation_errors() {
        let mut s = TrainSpec::new("c");
        s.channel_volume = 0.0;
        assert!(s.validate().unwrap_err().is_validation());
        let mut s = TrainSpec::new("c");
        s.train.epochs = 0;
        assert!(s.validate().unwrap_err().is_validation());
        let mut s = TrainSpec::new("c");
        s.channel_devices = vec!["nokia".into()];
        assert!(s.source().unwrap_err().is_validation());
    }

    #[test]
    fn log_has_one_line_per_epoch() {
        let r = TrainReport {
            train_size: 9,
            validation_size: 1,
            epochs: vec![
                EpochStats {
                    epoch: 1,
                    loss: 2.0,
                    train_accuracy: 0.1,
                    validation_accuracy: Some(0.0),
                },
                EpochStats {
                    epoch: 2,
                    loss: 1.5,
                    train_accuracy: 0.3,
                    validation_accuracy: None,
                },
            ],
        };
        let text = render_log(&TrainSpec::new("c"), &r);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            body,
            [
                "epoch,loss,train_accuracy,validation_accuracy",
                "1,2,0.1,0",
                "2,1.5,0.3,"
            ]
        );
    }
}
