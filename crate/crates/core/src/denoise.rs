//! Turning a charging-current trace back into audio: DC removal and
//! high-pass filtering, then magnitude spectral subtraction against a noise
//! estimate taken while the phone sits idle.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::CurrentTrace;
use crate::signal::{apply_filter, istft, stft_complex, AudioBuffer, FilterSpec, SignalError, StftGeometry};

pub const DEFAULT_FLOOR: f64 = 0.02;
pub const DEFAULT_HP_CUTOFF: f64 = 80.0;
pub const MIN_NOISE_FRAMES: usize = 10;

pub fn default_geometry() -> StftGeometry {
    StftGeometry::new(256, 128, 512).expect("valid geometry")
}

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("trace is constant; there is no audio to recover")]
    Degenerate,
    #[error("idle segment spans {frames} frames, need at least {needed}")]
    TooShort { frames: usize, needed: usize },
    #[error("noise profile does not match the signal: {0}")]
    GeometryMismatch(String),
    #[error("spectral floor must lie in [0, 1], got {0}")]
    InvalidFloor(f64),
    #[error("noise profile {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("noise profile {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub mean_magnitude: Vec<f64>,
    pub bin_width: f64,
    pub frames_used: usize,
    pub geometry: StftGeometry,
    pub rate: f64,
}

impl NoiseProfile {
    pub fn zeros(geometry: StftGeometry, rate: f64) -> Self {
        Self {
            mean_magnitude: vec![0.0; geometry.bins()],
            bin_width: rate / geometry.fft_len as f64,
            frames_used: 1,
            geometry,
            rate,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean_magnitude: self.mean_magnitude.iter().map(|m| m * factor).collect(),
            ..self.clone()
        }
    }

    /// CSV with a `bin_hz,magnitude` header. STFT geometry and rate travel in
    /// leading `#` comment lines so the profile can be reused.
    pub fn to_csv(&self) -> String {
        let g = self.geometry;
        let mut out = format!(
            "# rate={} window_len={} hop={} fft_len={} frames_used={}\nbin_hz,magnitude\n",
            self.rate, g.window_len, g.hop, g.fft_len, self.frames_used
        );
        for (k, m) in self.mean_magnitude.iter().enumerate() {
            let _ = writeln!(out, "{},{:e}", k as f64 * self.bin_width, m);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DenoiseError> {
        std::fs::write(path, self.to_csv()).map_err(|source| DenoiseError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, DenoiseError> {
        let text = std::fs::read_to_string(path).map_err(|source| DenoiseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_csv(&text).map_err(|detail| DenoiseError::Format {
            path: path.to_path_buf(),
            detail,
        })
    }

    fn parse_csv(text: &str) -> Result<Self, String> {
        let mut meta = std::collections::HashMap::new();
        let mut header_seen = false;
        let mut mags = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = line.strip_prefix('#') {
                for kv in c.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
            } else if !header_seen {
                if line != "bin_hz,magnitude" {
                    return Err("expected header `bin_hz,magnitude`".into());
                }
                header_seen = true;
            } else {
                let (_, m) = line.split_once(',').ok_or("row without comma")?;
                let m: f64 = m.trim().parse().map_err(|e| format!("{e}"))?;
                if !(m >= 0.0 && m.is_finite()) {
                    return Err(format!("magnitude {m} is not a non-negative number"));
                }
                mags.push(m);
            }
        }
        let get = |k: &str| -> Result<f64, String> {
            meta.get(k)
                .ok_or(format!("missing `{k}` in comment header"))?
                .parse::<f64>()
                .map_err(|e| format!("{k}: {e}"))
        };
        let geometry = StftGeometry::new(
            get("window_len")? as usize,
            get("hop")? as usize,
            get("fft_len")? as usize,
        )
        .map_err(|e| e.to_string())?;
        if mags.len() != geometry.bins() {
            return Err(format!("{} rows for {} bins", mags.len(), geometry.bins()));
        }
        let rate = get("rate")?;
        let frames_used = get("frames_used")? as usize;
        if frames_used == 0 {
            return Err("frames_used must be at least 1".into());
        }
        Ok(Self {
            mean_magnitude: mags,
            bin_width: rate / geometry.fft_len as f64,
            frames_used,
            geometry,
            rate,
        })
    }
}

/// Mean removal, high-pass filtering and peak normalization of a current trace.
pub fn recover_primitive(trace: &CurrentTrace, hp_cutoff: f64) -> Result<AudioBuffer, DenoiseError> {
    let v = trace.values();
    let first = v.first().copied().ok_or(DenoiseError::Degenerate)?;
    if v.iter().all(|&x| x == first) {
        return Err(DenoiseError::Degenerate);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let centred = AudioBuffer::new(v.iter().map(|x| x - mean).collect(), trace.rate())?;
    let filtered = apply_filter(&centred, &FilterSpec::high_pass(hp_cutoff))?;
    if filtered.peak() == 0.0 {
        return Err(DenoiseError::Degenerate);
    }
    Ok(filtered.peak_normalized(1.0))
}

/// Per-bin mean STFT magnitude over an idle recording.
pub fn estimate_noise(idle: &AudioBuffer, geometry: StftGeometry) -> Result<NoiseProfile, DenoiseError> {
    geometry.validate()?;
    let frames = geometry.frames_for(idle.len());
    if idle.len() < geometry.window_len || frames < MIN_NOISE_FRAMES {
        return Err(DenoiseError::TooShort {
            frames: if idle.len() < geometry.window_len { 0 } else { frames },
            needed: MIN_NOISE_FRAMES,
        });
    }
    let spec = stft_complex(idle, geometry)?;
    let bins = geometry.bins();
    let mut mean = vec![0.0; bins];
    for f in 0..spec.frames {
        for (m, c) in mean.iter_mut().zip(spec.frame(f)) {
            *m += c.norm();
        }
    }
    mean.iter_mut().for_each(|m| *m /= spec.frames as f64);
    Ok(NoiseProfile {
        mean_magnitude: mean,
        bin_width: idle.rate() / geometry.fft_len as f64,
        frames_used: spec.frames,
        geometry,
        rate: idle.rate(),
    })
}

/// `|Y| = max(|X| - N, floor |X|)` with the phase of `X` kept.
///
/// The signal is zero-padded by one window on each side (and up to a whole hop
/// at the end) so every output sample is covered by full overlap-add.
pub fn spectral_subtract(noisy: &AudioBuffer, profile: &NoiseProfile, floor: f64) -> Result<AudioBuffer, DenoiseError> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(DenoiseError::InvalidFloor(floor));
    }
    let g = profile.geometry;
    g.validate()?;
    if profile.mean_magnitude.len() != g.bins() {
        return Err(DenoiseError::GeometryMismatch(format!(
            "{} profile bins for a {}-point FFT",
            profile.mean_magnitude.len(),
            g.fft_len
        )));
    }
    if profile.rate != noisy.rate() {
        return Err(DenoiseError::GeometryMismatch(format!(
            "profile taken at {} Hz, signal at {} Hz",
            profile.rate,
            noisy.rate()
        )));
    }
    if noisy.is_empty() {
        return Ok(noisy.clone());
    }

    let w = g.window_len;
    let body = noisy.len() + 2 * w;
    let tail = (g.hop - (body - w) % g.hop) % g.hop;
    let mut padded = vec![0.0; w];
    padded.extend_from_slice(noisy.samples());
    padded.resize(body + tail, 0.0);
    let padded = AudioBuffer::new(padded, noisy.rate())?;

    let spec = stft_complex(&padded, g)?;
    let bins = g.bins();
    let mut mags = Vec::with_capacity(spec.frames * bins);
    for f in 0..spec.frames {
        for (c, n) in spec.frame(f).iter().zip(&profile.mean_magnitude) {
            let x = c.norm();
            mags.push((x - n).max(floor * x));
        }
    }
    let out = istft(&spec.with_magnitudes(&mags)?)?;
    Ok(out.slice(w, w + noisy.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub hp_cutoff: f64,
    pub floor: f64,
    pub geometry: StftGeometry,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            hp_cutoff: DEFAULT_HP_CUTOFF,
            floor: DEFAULT_FLOOR,
            geometry: default_geometry(),
        }
    }
}

/// Recovers the primitive audio, estimates noise from the first `idle_len`
/// samples and subtracts it from the whole trace.
pub fn denoise_trace(trace: &CurrentTrace, idle_len: usize, cfg: &DenoiseConfig) -> Result<AudioBuffer, DenoiseError> {
    let primitive = recover_primitive(trace, cfg.hp_cutoff)?;
    let idle = primitive.slice(0, idle_len.min(primitive.len()));
    let profile = estimate_noise(&idle, cfg.geometry)?;
    spectral_subtract(&primitive, &profile, cfg.floor)
}
