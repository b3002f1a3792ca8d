//! Electrical time series tagged with their unit, and their on-disk formats.
//!
//! Two formats are supported. CSV has a `time_s,value` header and one row per
//! sample. Raw files hold little-endian `f32` values and are described by a
//! JSON sidecar at `<path>.json` carrying rate, unit and length.

use std::fmt::Write as _;
use std::fs;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ChannelError;
use crate::signal::{AudioBuffer, SignalError};

pub trait Unit: Copy + Default + std::fmt::Debug + PartialEq + 'static {
    const SYMBOL: &'static str;
    const NAME: &'static str;

    fn admits(value: f64) -> bool {
        value.is_finite()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Volts;
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Amperes;
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Watts;

impl Unit for Volts {
    const SYMBOL: &'static str = "V";
    const NAME: &'static str = "voltage";
}

impl Unit for Amperes {
    const SYMBOL: &'static str = "A";
    const NAME: &'static str = "current";
}

impl Unit for Watts {
    const SYMBOL: &'static str = "W";
    const NAME: &'static str = "power";

    fn admits(value: f64) -> bool {
        value.is_finite() && value >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<U: Unit> {
    values: Vec<f64>,
    rate: f64,
    unit: PhantomData<U>,
}

pub type VoltageTrace = Trace<Volts>;
pub type CurrentTrace = Trace<Amperes>;
pub type PowerTrace = Trace<Watts>;

impl<U: Unit> Trace<U> {
    pub fn new(values: Vec<f64>, rate: f64) -> Result<Self, ChannelError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate).into());
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !U::admits(**v)) {
            return Err(ChannelError::InvalidValue {
                index,
                value,
                unit: U::NAME,
            });
        }
        Ok(Self {
            values,
            rate,
            unit: PhantomData,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.rate
    }

    /// Drops the unit so the series can go through the audio-domain DSP.
    pub fn to_audio(&self) -> AudioBuffer {
        AudioBuffer::new(self.values.clone(), self.rate).expect("trace values are finite")
    }

    pub fn from_audio(buffer: AudioBuffer) -> Result<Self, ChannelError> {
        let rate = buffer.rate();
        Self::new(buffer.into_samples(), rate)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ChannelError> {
        let mut out = String::with_capacity(self.values.len() * 24 + 16);
        out.push_str("time_s,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.9},{:e}", i as f64 / self.rate, v);
        }
        fs::write(path, out).map_err(|source| io(path, source))
    }

    /// Reads a CSV trace. The rate comes from the first two timestamps, so at
    /// least two rows are required.
    pub fn read_csv(path: &Path) -> Result<Self, ChannelError> {
        let text = fs::read_to_string(path).map_err(|source| io(path, source))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("time_s,value") {
            return Err(format_err(path, "expected header `time_s,value`"));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| format_err(path, &format!("row {} has no comma", n + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format_err(path, &format!("row {}: {e}", n + 2)))
            };
            times.push(parse(t)?);
            values.push(parse(v)?);
        }
        if times.len() < 2 {
            return Err(format_err(path, "need at least two rows to infer the rate"));
        }
        let span = times[times.len() - 1] - times[0];
        if !(span > 0.0) {
            return Err(format_err(path, "timestamps do not increase"));
        }
        let rate = (times.len() - 1) as f64 / span;
        // timestamps are printed to 1 ns, so snap to the nearest whole hertz when close
        let rate = if (rate - rate.round()).abs() < 1e-3 {
            rate.round()
        } else {
            rate
        };
        Self::new(values, rate)
    }

    pub fn write_raw(&self, path: &Path) -> Result<(), ChannelError> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|source| io(path, source))?;
        let sidecar = RawSidecar {
            rate: self.rate,
            unit: U::SYMBOL.to_string(),
            length: self.values.len(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        let side = sidecar_path(path);
        fs::write(&side, json).map_err(|source| io(&side, source))
    }

    pub fn read_raw(path: &Path) -> Result<Self, ChannelError> {
        let side = sidecar_path(path);
        let json = fs::read_to_string(&side).map_err(|source| io(&side, source))?;
        let sidecar: RawSidecar = serde_json::from_str(&json).map_err(|e| format_err(&side, &e.to_string()))?;
        if sidecar.unit != U::SYMBOL {
            return Err(format_err(
                &side,
                &format!("unit is `{}`, expected `{}`", sidecar.unit, U::SYMBOL),
            ));
        }
        let bytes = fs::read(path).map_err(|source| io(path, source))?;
        if bytes.len() != sidecar.length * 4 {
            return Err(format_err(
                path,
                &format!(
                    "{} bytes on disk, sidecar promises {} samples",
                    bytes.len(),
                    sidecar.length
                ),
            ));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(values, sidecar.rate)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSidecar {
    rate: f64,
    unit: String,
    length: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io(path: &Path, source: std::io::Error) -> ChannelError {
    ChannelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, detail: &str) -> ChannelError {
    ChannelError::TraceFormat {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}
