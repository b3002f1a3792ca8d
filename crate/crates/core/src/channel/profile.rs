//! Per-phone parameters. The built-in registry ships nine phones; a custom
//! registry can be loaded from a TOML file with the same layout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ChannelError;

const BUILTIN: &str = include_str!("profiles.toml");

pub const MIC_RATES: [f64; 3] = [32000.0, 44100.0, 48000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Speakers {
    Single,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Port {
    Lightning,
    UsbC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub slug: String,
    pub name: String,
    pub manufacturer: String,
    pub mic_rate: f64,
    pub injection_snr_db: f64,
    pub leaked_snr_db: f64,
    pub accuracy_ref: f64,
    pub port: Port,
    /// Metadata only; the power model treats both layouts alike.
    pub speakers: Speakers,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !MIC_RATES.contains(&self.mic_rate) {
            return Err(ChannelError::Registry(format!(
                "{}: mic_rate {} is not one of 32000, 44100, 48000",
                self.slug, self.mic_rate
            )));
        }
        if !self.leaked_snr_db.is_finite() || !self.injection_snr_db.is_finite() {
            return Err(ChannelError::Registry(format!("{}: SNR must be finite", self.slug)));
        }
        if !(0.0..=1.0).contains(&self.accuracy_ref) {
            return Err(ChannelError::Registry(format!(
                "{}: accuracy_ref outside [0, 1]",
                self.slug
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRegistry {
    #[serde(rename = "device")]
    devices: Vec<DeviceProfile>,
}

impl ProfileRegistry {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in registry is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ChannelError> {
        let reg: Self = toml::from_str(text).map_err(|e| ChannelError::Registry(e.to_string()))?;
        for (i, d) in reg.devices.iter().enumerate() {
            d.validate()?;
            if reg.devices[..i].iter().any(|o| o.slug == d.slug) {
                return Err(ChannelError::Registry(format!("duplicate slug `{}`", d.slug)));
            }
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ChannelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn devices(&self) -> &[DeviceProfile] {
        &self.devices
    }

    /// Looks a phone up by slug or, case-insensitively, by display name.
    pub fn get(&self, key: &str) -> Result<&DeviceProfile, ChannelError> {
        self.devices
            .iter()
            .find(|d| d.slug == key || d.name.eq_ignore_ascii_case(key))
            .ok_or_else(|| ChannelError::UnknownProfile(key.to_string()))
    }
}
