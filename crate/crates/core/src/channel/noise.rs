//! Charging-current noise from firmware and apps, plus screen-touch transients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::profile::DeviceProfile;
use super::ChannelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseShape {
    White,
    #[default]
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchBurst {
    pub start: f64,
    pub duration: f64,
    /// Burst RMS relative to the firmware noise RMS.
    pub gain_db: f64,
}

/// How the firmware noise level is pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum NoiseCalibration {
    /// Noise power is set so the full-volume leak of the audio being played
    /// sits at `firmware_noise_floor` dB over the playback segment.
    #[default]
    PerPlayback,
    /// Fixed noise power in A².
    Absolute { power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSynthSpec {
    /// Leaked-audio SNR in dB at full volume; `None` turns firmware noise off.
    pub firmware_noise_floor: Option<f64>,
    #[serde(default)]
    pub spectral_shape: NoiseShape,
    #[serde(default)]
    pub touch_bursts: Vec<TouchBurst>,
    #[serde(default)]
    pub calibration: NoiseCalibration,
}

impl NoiseSynthSpec {
    pub fn disabled() -> Self {
        Self {
            firmware_noise_floor: None,
            spectral_shape: NoiseShape::Pink,
            touch_bursts: Vec::new(),
            calibration: NoiseCalibration::PerPlayback,
        }
    }

    pub fn for_device(device: &DeviceProfile) -> Self {
        Self {
            firmware_noise_floor: Some(device.leaked_snr_db),
            ..Self::disabled()
        }
    }

    pub fn validate(&self, trace_seconds: f64) -> Result<(), ChannelError> {
        if let Some(f) = self.firmware_noise_floor {
            if !f.is_finite() {
                return Err(ChannelError::InvalidParameter(format!("noise floor {f} dB")));
            }
        }
        if let NoiseCalibration::Absolute { power } = self.calibration {
            if !(power >= 0.0 && power.is_finite()) {
                return Err(ChannelError::InvalidParameter(format!("noise power {power}")));
            }
        }
        for b in &self.touch_bursts {
            let fits = b.start >= 0.0 && b.duration > 0.0 && b.start + b.duration <= trace_seconds + 1e-9;
            if !fits || !b.gain_db.is_finite() {
                return Err(ChannelError::BurstOutsideTrace {
                    start: b.start,
                    duration: b.duration,
                    length: trace_seconds,
                });
            }
        }
        Ok(())
    }
}

/// Folds seed material into one well-mixed 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Independent, reproducible random stream for one noise component.
pub fn stream(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}

/// Zero-mean, unit-variance noise of the given shape.
pub fn unit_noise(shape: NoiseShape, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let shaped = match shape {
        NoiseShape::White => white,
        NoiseShape::Pink => pink_from(white),
    };
    standardize(shaped)
}

fn pink_from(mut white: Vec<f64>) -> Vec<f64> {
    let n = white.len();
    if n < 2 {
        return white;
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut white, &mut spec).expect("lengths match plan");
    spec[0] = 0.0.into();
    for (k, c) in spec.iter_mut().enumerate().skip(1) {
        *c /= (k as f64).sqrt();
    }
    if n.is_multiple_of(2) {
        let last = spec.len() - 1;
        spec[last].im = 0.0;
    }
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("lengths match plan");
    out
}

fn standardize(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    x
}

/// Hann-enveloped white bursts with peak-section RMS `rms * 10^(gain/20)`.
pub fn touch_bursts(bursts: &[TouchBurst], len: usize, rate: f64, rms: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for b in bursts {
        let start = (b.start * rate).round() as usize;
        let width = ((b.duration * rate).round() as usize).max(1);
        let amp = rms * 10f64.powf(b.gain_db / 20.0);
        for i in 0..width {
            let n: f64 = StandardNormal.sample(rng);
            if let Some(slot) = out.get_mut(start + i) {
                let env = (std::f64::consts::PI * (i as f64 + 0.5) / width as f64).sin().powi(2);
                *slot += amp * env * n;
            }
        }
    }
    out
}
