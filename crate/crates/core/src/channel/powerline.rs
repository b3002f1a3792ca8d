//! Audio leakage into the charging current of an unmodified cable.
//!
//! The loudspeaker draws `P(t) = (a v x(t))^2 R`, so a tone at `f` shows up in
//! the supply current at `2f`. With the battery full, the charger current is
//! this draw over the supply voltage on top of a constant idle draw, buried in
//! firmware noise.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::adc::{adc_sample, AdcConfig, AdcRange};
use super::noise::{stream, touch_bursts, unit_noise, NoiseCalibration, NoiseSynthSpec};
use super::profile::DeviceProfile;
use super::trace::{CurrentTrace, PowerTrace};
use super::ChannelError;
use crate::signal::metrics::{ac_power, mean_power};
use crate::signal::resample::output_len;
use crate::signal::{sample_at, AudioBuffer};

const NOISE_STREAM: u64 = 0;
const BURST_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerlineConfig {
    pub speaker_resistance: f64,
    pub amplitude_gain: f64,
    pub supply_voltage: f64,
    pub idle_current: f64,
    pub adc: AdcConfig,
    /// Seconds of idle charging recorded before playback starts.
    pub idle_lead_in: f64,
    pub noise: NoiseSynthSpec,
}

impl Default for PowerlineConfig {
    fn default() -> Self {
        Self {
            speaker_resistance: 8.0,
            amplitude_gain: 0.5,
            supply_voltage: 5.0,
            idle_current: 0.15,
            adc: AdcConfig::new(8000.0, 12, AdcRange::Auto { headroom: 0.1 }),
            idle_lead_in: 0.5,
            noise: NoiseSynthSpec::disabled(),
        }
    }
}

impl PowerlineConfig {
    pub fn for_device(device: &DeviceProfile) -> Self {
        Self {
            noise: NoiseSynthSpec::for_device(device),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ChannelError::InvalidParameter(format!("{name} = {v}")))
            }
        };
        positive("supply_voltage", self.supply_voltage)?;
        positive("speaker_resistance", self.speaker_resistance)?;
        positive("amplitude_gain", self.amplitude_gain)?;
        if !(self.idle_current >= 0.0 && self.idle_current.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "idle_current = {}",
                self.idle_current
            )));
        }
        if !(self.idle_lead_in >= 0.0 && self.idle_lead_in.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "idle_lead_in = {}",
                self.idle_lead_in
            )));
        }
        self.adc.validate()
    }

    /// First ADC sample of the playback segment.
    pub fn playback_start(&self) -> usize {
        (self.idle_lead_in * self.adc.rate).round() as usize
    }
}

fn check_volume(volume: f64) -> Result<(), ChannelError> {
    if volume > 0.0 && volume <= 1.0 {
        Ok(())
    } else {
        Err(ChannelError::InvalidVolume(volume))
    }
}

/// Instantaneous loudspeaker power at the audio rate.
pub fn loudspeaker_power(audio: &AudioBuffer, cfg: &PowerlineConfig, volume: f64) -> Result<PowerTrace, ChannelError> {
    check_volume(volume)?;
    cfg.validate()?;
    let g = cfg.amplitude_gain * volume;
    let p = audio
        .samples()
        .iter()
        .map(|x| (g * x) * (g * x) * cfg.speaker_resistance)
        .collect();
    PowerTrace::new(p, audio.rate())
}

/// The parts of a synthesized current trace before quantization, all at the
/// ADC rate and in amperes.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerlineComponents {
    pub rate: f64,
    pub idle: f64,
    pub leaked: Vec<f64>,
    pub noise: Vec<f64>,
    pub bursts: Vec<f64>,
    pub playback: Range<usize>,
}

impl PowerlineComponents {
    pub fn len(&self) -> usize {
        self.leaked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaked.is_empty()
    }

    pub fn sum(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.idle + self.leaked[i] + self.noise[i] + self.bursts[i])
            .collect()
    }

    /// SNR of the leak over the playback segment, from the AC power of each part.
    pub fn leaked_snr_db(&self) -> Option<f64> {
        let seg = self.playback.clone();
        let s = ac_power(&self.leaked[seg.clone()]);
        let n = mean_power(&self.noise[seg]);
        (n > 0.0 && s > 0.0).then(|| 10.0 * (s / n).log10())
    }
}

pub fn synthesize_components(
    audio: &AudioBuffer,
    cfg: &PowerlineConfig,
    volume: f64,
    seed: u64,
) -> Result<PowerlineComponents, ChannelError> {
    check_volume(volume)?;
    cfg.validate()?;
    let adc_rate = cfg.adc.rate;

    // full-volume leak current, prefixed with the idle lead-in
    let lead = (cfg.idle_lead_in * audio.rate()).round() as usize;
    let full = loudspeaker_power(audio, cfg, 1.0)?;
    let mut current = vec![0.0; lead];
    current.extend(full.values().iter().map(|p| p / cfg.supply_voltage));
    let leaked_full = sample_at(&AudioBuffer::new(current, audio.rate())?, adc_rate)?.into_samples();
    let len = leaked_full.len();

    let start = cfg.playback_start().min(len);
    let end = (start + output_len(audio.len(), audio.rate(), adc_rate)).min(len);
    let playback = start..end;

    let spec = &cfg.noise;
    spec.validate(len as f64 / adc_rate)?;

    let reference = {
        let p = if playback.is_empty() {
            0.0
        } else {
            ac_power(&leaked_full[playback.clone()])
        };
        if p > 0.0 {
            p
        } else {
            full_scale_tone_leak_power(cfg)
        }
    };

    let noise = match spec.firmware_noise_floor {
        None => vec![0.0; len],
        Some(floor_db) => {
            let mut n = unit_noise(spec.spectral_shape, len, &mut stream(seed, NOISE_STREAM));
            let (target, measured) = match spec.calibration {
                NoiseCalibration::PerPlayback => {
                    let seg = if playback.is_empty() { 0..len } else { playback.clone() };
                    (reference / 10f64.powf(floor_db / 10.0), mean_power(&n[seg]))
                }
                NoiseCalibration::Absolute { power } => (power, mean_power(&n)),
            };
            let scale = if measured > 0.0 {
                (target / measured).sqrt()
            } else {
                0.0
            };
            n.iter_mut().for_each(|v| *v *= scale);
            n
        }
    };

    let burst_rms = if spec.firmware_noise_floor.is_some() {
        mean_power(&noise).sqrt()
    } else {
        reference.sqrt()
    };
    let bursts = touch_bursts(
        &spec.touch_bursts,
        len,
        adc_rate,
        burst_rms,
        &mut stream(seed, BURST_STREAM),
    );

    let v2 = volume * volume;
    Ok(PowerlineComponents {
        rate: adc_rate,
        idle: cfg.idle_current,
        leaked: leaked_full.iter().map(|v| v * v2).collect(),
        noise,
        bursts,
        playback,
    })
}

/// Leak AC power for a full-scale sinusoid at full volume.
fn full_scale_tone_leak_power(cfg: &PowerlineConfig) -> f64 {
    let swing = cfg.amplitude_gain * cfg.amplitude_gain * cfg.speaker_resistance / 2.0 / cfg.supply_voltage;
    swing * swing / 2.0
}

/// Charger current seen by a probe on the cable, digitized at the ADC rate.
pub fn synthesize_current_trace(
    audio: &AudioBuffer,
    cfg: &PowerlineConfig,
    volume: f64,
    seed: u64,
) -> Result<CurrentTrace, ChannelError> {
    let parts = synthesize_components(audio, cfg, volume, seed)?;
    let analog = CurrentTrace::new(parts.sum(), parts.rate)?;
    Ok(adc_sample(&analog, &cfg.adc)?.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ProfileRegistry;
    use crate::signal::spectral::{magnitude_spectrum, stft};
    use std::f64::consts::PI;

    fn honor() -> PowerlineConfig {
        PowerlineConfig::for_device(ProfileRegistry::builtin().get("honor-10").unwrap())
    }

    fn speechy(rate: f64, secs: f64) -> AudioBuffer {
        AudioBuffer::from_fn((rate * secs) as usize, rate, |t| {
            let env = (PI * t / secs).sin().powi(2);
            env * (0.5 * (2.0 * PI * 180.0 * t).sin()
                + 0.3 * (2.0 * PI * 730.0 * t).sin()
                + 0.1 * (2.0 * PI * 1300.0 * t).sin())
        })
        .unwrap()
    }

    #[test]
    fn cosine_power_is_dc_plus_doubled_line() {
        let rate = 16000.0;
        let a = AudioBuffer::from_fn(16000, rate, |t| (2.0 * PI * 1000.0 * t).cos()).unwrap();
        let cfg = PowerlineConfig::default();
        let p = loudspeaker_power(&a, &cfg, 1.0).unwrap();
        let c = cfg.amplitude_gain.powi(2) * cfg.speaker_resistance / 2.0;
        for (i, v) in p.values().iter().enumerate() {
            let t = i as f64 / rate;
            assert!((v - c * (1.0 + (4.0 * PI * 1000.0 * t).cos())).abs() < 1e-12);
        }
        let mean = p.values().iter().sum::<f64>() / p.len() as f64;
        assert!((mean - c).abs() < 1e-9);
        let ac: Vec<f64> = p.values().iter().map(|v| v - mean).collect();
        let spec = magnitude_spectrum(&ac);
        let bw = rate / ac.len() as f64;
        let peak = (0..spec.len()).max_by(|&i, &j| spec[i].total_cmp(&spec[j])).unwrap();
        assert!((peak as f64 * bw - 2000.0).abs() <= bw);
        let total: f64 = spec.iter().map(|m| m * m).sum();
        let line: f64 = spec[peak - 2..=peak + 2].iter().map(|m| m * m).sum();
        assert!(line / total > 0.999);
    }

    #[test]
    fn silence_draws_no_power_and_volume_is_quadratic() {
        let cfg = PowerlineConfig::default();
        let z = loudspeaker_power(&AudioBuffer::silence(100, 8000.0).unwrap(), &cfg, 1.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let a = speechy(8000.0, 0.2);
        let full = loudspeaker_power(&a, &cfg, 1.0).unwrap();
        let half = loudspeaker_power(&a, &cfg, 0.5).unwrap();
        for (f, h) in full.values().iter().zip(half.values()) {
            assert!((h - f / 4.0).abs() <= 1e-15 * f.max(1.0));
        }
        assert!(loudspeaker_power(&a, &cfg, 0.0).is_err());
        assert!(loudspeaker_power(&a, &cfg, 1.5).is_err());
    }

    #[test]
    fn chirp_tracks_at_double_frequency() {
        let rate = 16000.0;
        let secs = 2.0;
        let f1 = 2000.0;
        let a = AudioBuffer::from_fn((rate * secs) as usize, rate, |t| (PI * f1 / secs * t * t).sin()).unwrap();
        let cfg = PowerlineConfig::default();
        let trace = synthesize_current_trace(&a, &cfg, 1.0, 7).unwrap();
        let start = cfg.playback_start();
        let seg = &trace.values()[start..];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let seg = AudioBuffer::new(seg.iter().map(|v| v - mean).collect(), trace.rate()).unwrap();
        let (w, h) = (256, 128);
        let s = stft(&seg, w, h, 512).unwrap();
        let mut hits = 0;
        let mut counted = 0;
        for (i, bin) in s.argmax_bins().into_iter().enumerate() {
            let t = (i * h) as f64 / 8000.0 + w as f64 / 2.0 / 8000.0;
            let expected = 2.0 * f1 * t / secs / s.bin_width;
            if expected < 2.0 {
                continue;
            }
            counted += 1;
            if (bin as f64 - expected).abs() <= 1.0 {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * counted as f64, "{hits}/{counted}");
    }

    #[test]
    fn silent_audio_is_idle_plus_noise() {
        let a = AudioBuffer::silence(8000, 8000.0).unwrap();
        let cfg = honor();
        let parts = synthesize_components(&a, &cfg, 1.0, 1).unwrap();
        assert!(parts.leaked.iter().all(|&v| v == 0.0));
        assert!(parts.noise.iter().any(|&v| v != 0.0));
        let sum = parts.sum();
        for (i, s) in sum.iter().enumerate() {
            assert_eq!(*s, cfg.idle_current + parts.noise[i]);
        }
    }

    #[test]
    fn honor_profile_hits_its_leak_snr() {
        let a = speechy(8000.0, 0.8);
        let cfg = honor();
        let parts = synthesize_components(&a, &cfg, 1.0, 42).unwrap();
        let trace = synthesize_current_trace(&a, &cfg, 1.0, 42).unwrap();
        // what is left once idle draw and leak are taken away is noise plus quantization
        let seg = parts.playback.clone();
        let residual: Vec<f64> = seg
            .clone()
            .map(|i| trace.values()[i] - cfg.idle_current - parts.leaked[i])
            .collect();
        let snr = 10.0 * (ac_power(&parts.leaked[seg]) / ac_power(&residual)).log10();
        assert!((snr - 5.75).abs() <= 0.5, "{snr}");
    }

    #[test]
    fn lower_volume_lowers_snr_by_its_fourth_power() {
        let a = speechy(8000.0, 0.8);
        let cfg = honor();
        let full = synthesize_components(&a, &cfg, 1.0, 3)
            .unwrap()
            .leaked_snr_db()
            .unwrap();
        let half = synthesize_components(&a, &cfg, 0.5, 3)
            .unwrap()
            .leaked_snr_db()
            .unwrap();
        assert!((full - half - 40.0 * 2f64.log10()).abs() < 1e-6);
    }

    #[test]
    fn absolute_calibration_fixes_noise_power() {
        let a = speechy(8000.0, 0.5);
        let mut cfg = honor();
        cfg.noise.calibration = NoiseCalibration::Absolute { power: 1e-6 };
        let p = synthesize_components(&a, &cfg, 1.0, 3).unwrap();
        assert!((mean_power(&p.noise) / 1e-6 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_trace() {
        let a = speechy(8000.0, 0.3);
        let mut cfg = honor();
        cfg.noise.touch_bursts.push(super::super::TouchBurst {
            start: 0.55,
            duration: 0.1,
            gain_db: 12.0,
        });
        let x = synthesize_current_trace(&a, &cfg, 0.75, 11).unwrap();
        let y = synthesize_current_trace(&a, &cfg, 0.75, 11).unwrap();
        let z = synthesize_current_trace(&a, &cfg, 0.75, 12).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn tone_appears_at_twice_its_frequency(f in 100.0f64..1950.0) {
                let rate = 16000.0;
                let a = AudioBuffer::from_fn(8000, rate, |t| (2.0 * PI * f * t).sin()).unwrap();
                let cfg = PowerlineConfig { idle_lead_in: 0.0, ..PowerlineConfig::default() };
                let trace = synthesize_current_trace(&a, &cfg, 1.0, 0).unwrap();
                let (peak, bw) = crate::signal::spectral::peak_frequency(
                    &{
                        let m = trace.values().iter().sum::<f64>() / trace.len() as f64;
                        trace.values().iter().map(|v| v - m).collect::<Vec<_>>()
                    },
                    trace.rate(),
                );
                prop_assert!((peak - 2.0 * f).abs() <= bw, "{} vs {}", peak, 2.0 * f);
            }

            #[test]
            fn leak_power_grows_with_volume(v1 in 0.05f64..1.0, dv in 0.01f64..0.5, seed in 0u64..50) {
                let v2 = (v1 + dv).min(1.0);
                prop_assume!(v2 > v1);
                let a = speechy(8000.0, 0.2);
                let cfg = honor();
                let p1 = synthesize_components(&a, &cfg, v1, seed).unwrap();
                let p2 = synthesize_components(&a, &cfg, v2, seed).unwrap();
                let seg = p1.playback.clone();
                prop_assert!(ac_power(&p2.leaked[seg.clone()]) > ac_power(&p1.leaked[seg]));
            }
        }
    }
}
