//! Experiment descriptions, read from TOML.
//!
//! ```toml
//! kind = "powerline_eval"
//! devices = ["honor-10", "pocophone"]   # or ["all"]
//! corpus = "data/digits"
//! model = "runs/model.bin"
//! volumes = [1.0, 0.5]
//! seed = 7
//! output = "runs/powerline"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::channel::{DeviceProfile, ProfileRegistry};
use crate::classifier::checkpoint::hex;
use crate::denoise::DenoiseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InjectionEval,
    EavesdropEval,
    PowerlineEval,
    VolumeSweep,
    NoiseSweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::InjectionEval => "injection_eval",
            ExperimentKind::EavesdropEval => "eavesdrop_eval",
            ExperimentKind::PowerlineEval => "powerline_eval",
            ExperimentKind::VolumeSweep => "volume_sweep",
            ExperimentKind::NoiseSweep => "noise_sweep",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ExperimentKind::PowerlineEval | ExperimentKind::VolumeSweep)
    }
}

fn all_devices() -> Vec<String> {
    vec!["all".into()]
}

fn full_volume() -> Vec<f64> {
    vec![1.0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    0.9
}

fn yes() -> bool {
    true
}

fn default_speech_level() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Slugs or display names; `"all"` expands to the whole registry.
    #[serde(default = "all_devices")]
    pub devices: Vec<String>,
    pub corpus: PathBuf,
    #[serde(default = "full_volume")]
    pub volumes: Vec<f64>,
    /// Ambient sound levels in dB for the air baseline.
    #[serde(default)]
    pub acoustic_noise_levels: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Classifier checkpoint for power-line experiments.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Correlation a recording needs to count as a successful attack.
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    /// Overrides the injection voltage factor of every device.
    #[serde(default)]
    pub injection_k: Option<f64>,
    /// Firmware noise in the charging current; off gives the noiseless upper bound.
    #[serde(default = "yes")]
    pub firmware_noise: bool,
    /// Playback level in dB that ambient levels are measured against.
    #[serde(default = "default_speech_level")]
    pub speech_level_db: f64,
    /// Uses only the first `limit` corpus files.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Device registry to use instead of the built-in one.
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub denoise: DenoiseConfig,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, corpus: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            devices: all_devices(),
            corpus: corpus.into(),
            volumes: full_volume(),
            acoustic_noise_levels: Vec::new(),
            seed: 0,
            output: default_output(),
            model: None,
            success_threshold: default_threshold(),
            injection_k: None,
            firmware_noise: true,
            speech_level_db: default_speech_level(),
            limit: None,
            profiles: None,
            denoise: DenoiseConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Config {
            path: PathBuf::from("<inline>"),
            detail: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a TOML file without validating it, so callers can adjust
    /// fields first. Relative paths inside it resolve against the current
    /// directory.
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let spec = Self::read(path)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.validate_fields()?;
        if self.kind.needs_model() && self.model.is_none() {
            return Err(HarnessError::Invalid(format!(
                "{} needs a model checkpoint",
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// Everything [`validate`](Self::validate) checks except the model.
    pub fn validate_fields(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.devices.is_empty() {
            return bad("at least one device is required".into());
        }
        if self.corpus.as_os_str().is_empty() {
            return bad("corpus path is empty".into());
        }
        if self.volumes.is_empty() {
            return bad("at least one volume is required".into());
        }
        if let Some(v) = self.volumes.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return bad(format!("volume {v} outside (0, 1]"));
        }
        if self.kind == ExperimentKind::VolumeSweep && self.volumes.windows(2).any(|w| w[1] >= w[0]) {
            return bad("sweep volumes must be strictly descending".into());
        }
        if self.kind == ExperimentKind::NoiseSweep && self.acoustic_noise_levels.is_empty() {
            return bad("noise sweep needs acoustic_noise_levels".into());
        }
        if let Some(l) = self.acoustic_noise_levels.iter().find(|l| !l.is_finite()) {
            return bad(format!("acoustic level {l}"));
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return bad(format!("success_threshold {} outside (0, 1]", self.success_threshold));
        }
        if let Some(k) = self.injection_k {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("injection_k {k} must be positive"));
            }
        }
        if !self.speech_level_db.is_finite() {
            return bad("speech_level_db must be finite".into());
        }
        if self.limit == Some(0) {
            return bad("limit must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the spec, output directory excluded.
    pub fn config_hash(&self) -> String {
        let mut spec = self.clone();
        spec.output = PathBuf::new();
        let json = serde_json::to_string(&spec).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn registry(&self) -> Result<ProfileRegistry, HarnessError> {
        Ok(match &self.profiles {
            Some(p) => ProfileRegistry::load(p)?,
            None => ProfileRegistry::builtin(),
        })
    }

    /// Devices in the order given, with `"all"` expanded in registry order.
    pub fn resolve_devices(&self, registry: &ProfileRegistry) -> Result<Vec<DeviceProfile>, HarnessError> {
        resolve_devices(&self.devices, registry)
    }
}

/// Looks up slugs or display names, expanding `"all"` and dropping repeats.
pub fn resolve_devices(keys: &[String], registry: &ProfileRegistry) -> Result<Vec<DeviceProfile>, HarnessError> {
    let mut out: Vec<DeviceProfile> = Vec::new();
    for key in keys {
        let batch: Vec<DeviceProfile> = if key.eq_ignore_ascii_case("all") {
            registry.devices().to_vec()
        } else {
            vec![registry.get(key)?.clone()]
        };
        for d in batch {
            if !out.iter().any(|o| o.slug == d.slug) {
                out.push(d);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let s = ExperimentSpec::parse("kind = \"injection_eval\"\ncorpus = \"c\"\n").unwrap();
        assert_eq!(s.devices, ["all"]);
        assert_eq!(s.volumes, [1.0]);
        assert_eq!(s.success_threshold, 0.9);
        assert!(s.firmware_noise);
        let reg = ProfileRegistry::builtin();
        assert_eq!(s.resolve_devices(&reg).unwrap().len(), 9);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "kind = \"injection_eval\"\ncorpus = \"c\"\ndevices = []\n",
            "kind = \"injection_eval\"\ncorpus = \"c\"\nvolumes = [1.5]\n",
            "kind = \"injection_eval\"\ncorpus = \"c\"\nvolumes = [0.0]\n",
            "kind = \"volume_sweep\"\ncorpus = \"c\"\nmodel = \"m\"\nvolumes = [0.5, 1.0]\n",
            "kind = \"noise_sweep\"\ncorpus = \"c\"\n",
            "kind = \"powerline_eval\"\ncorpus = \"c\"\n",
            "kind = \"injection_eval\"\ncorpus = \"c\"\nbogus = 1\n",
            "kind = \"teleport\"\ncorpus = \"c\"\n",
        ] {
            let e = ExperimentSpec::parse(text).unwrap_err();
            assert!(e.is_validation(), "{text}: {e}");
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentSpec::new(ExperimentKind::InjectionEval, "c");
        assert_eq!(a.config_hash(), a.clone().config_hash());
        assert_eq!(a.config_hash().len(), 64);
        let b = ExperimentSpec { seed: 1, ..a.clone() };
        assert_ne!(a.config_hash(), b.config_hash());
        let c = ExperimentSpec {
            output: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), c.config_hash());
        assert_eq!(ExperimentSpec::parse(&a.to_toml()).unwrap(), a);
    }

    #[test]
    fn devices_resolve_by_slug_or_name_without_duplicates() {
        let reg = ProfileRegistry::builtin();
        let mut s = ExperimentSpec::new(ExperimentKind::InjectionEval, "c");
        s.devices = vec!["Honor 10".into(), "honor-10".into(), "pixel-4xl".into()];
        let d = s.resolve_devices(&reg).unwrap();
        assert_eq!(
            d.iter().map(|d| d.slug.as_str()).collect::<Vec<_>>(),
            ["honor-10", "pixel-4xl"]
        );
        s.devices = vec!["nokia".into()];
        assert!(s.resolve_devices(&reg).unwrap_err().is_validation());
    }
}
