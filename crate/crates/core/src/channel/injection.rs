//! Voice injection over the microphone wire.
//!
//! Audio is carried as a voltage swing around the DC bias the phone expects
//! on its microphone line, smoothed by a capacitor, and recorded by the
//! phone's own ADC at its microphone rate.

use serde::{Deserialize, Serialize};

use super::profile::DeviceProfile;
use super::trace::VoltageTrace;
use super::ChannelError;
use crate::signal::filter::rc_lowpass;
use crate::signal::{resample, AudioBuffer, SignalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub k: f64,
    pub dc_offset_in: f64,
    pub capacitor_cutoff: f64,
    pub mic_resistance: f64,
    pub device: DeviceProfile,
}

impl InjectionConfig {
    pub const DEFAULT_K: f64 = 0.1;
    pub const DEFAULT_DC_OFFSET: f64 = 1.45;
    pub const DEFAULT_CAPACITOR_CUTOFF: f64 = 12_000.0;
    pub const DEFAULT_MIC_RESISTANCE: f64 = 2000.0;

    pub fn for_device(device: DeviceProfile) -> Self {
        Self {
            k: Self::DEFAULT_K,
            dc_offset_in: Self::DEFAULT_DC_OFFSET,
            capacitor_cutoff: Self::DEFAULT_CAPACITOR_CUTOFF,
            mic_resistance: Self::DEFAULT_MIC_RESISTANCE,
            device,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!("k = {}", self.k)));
        }
        if !(self.dc_offset_in > 0.0 && self.dc_offset_in.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "dc_offset_in = {}",
                self.dc_offset_in
            )));
        }
        let nyquist = self.device.mic_rate / 2.0;
        if !(self.capacitor_cutoff > 0.0 && self.capacitor_cutoff < nyquist) {
            return Err(SignalError::CutoffAboveNyquist {
                cutoff: self.capacitor_cutoff,
                nyquist,
            }
            .into());
        }
        Ok(())
    }
}

/// `V_i(t) = k x(t) + dc_offset_in`, at the audio rate.
pub fn modulate_injection(audio: &AudioBuffer, cfg: &InjectionConfig) -> Result<VoltageTrace, ChannelError> {
    cfg.validate()?;
    let swing = cfg.k * audio.peak();
    if swing >= cfg.dc_offset_in {
        return Err(ChannelError::NegativeVoltage {
            swing,
            offset: cfg.dc_offset_in,
        });
    }
    let v = audio.samples().iter().map(|x| cfg.k * x + cfg.dc_offset_in).collect();
    VoltageTrace::new(v, audio.rate())
}

/// First-order RC smoothing of a stepped drive voltage. DC passes unchanged.
pub fn capacitor_smooth(trace: &VoltageTrace, cutoff: f64) -> Result<VoltageTrace, ChannelError> {
    let nyquist = trace.rate() / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(SignalError::CutoffAboveNyquist { cutoff, nyquist }.into());
    }
    VoltageTrace::new(rc_lowpass(trace.values(), cutoff, trace.rate()), trace.rate())
}

/// What the victim phone records: bias removed, rescaled by `1/k`, converted
/// to the microphone rate and clamped to full scale.
pub fn phone_record_injected(trace: &VoltageTrace, cfg: &InjectionConfig) -> Result<AudioBuffer, ChannelError> {
    cfg.validate()?;
    let x: Vec<f64> = trace.values().iter().map(|v| (v - cfg.dc_offset_in) / cfg.k).collect();
    let at_mic = resample(&AudioBuffer::new(x, trace.rate())?, cfg.device.mic_rate)?;
    Ok(at_mic.map(|v| v.clamp(-1.0, 1.0))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ProfileRegistry;
    use crate::signal::metrics::pearson;
    use crate::signal::spectral::magnitude_spectrum;
    use std::f64::consts::PI;

    fn cfg(slug: &str) -> InjectionConfig {
        InjectionConfig::for_device(ProfileRegistry::builtin().get(slug).unwrap().clone())
    }

    #[test]
    fn silence_gives_constant_bias() {
        let a = AudioBuffer::silence(480, 48000.0).unwrap();
        let v = modulate_injection(&a, &cfg("honor-10")).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.45));
        let rec = phone_record_injected(&v, &cfg("honor-10")).unwrap();
        assert!(rec.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn full_scale_swing_is_two_tenths_peak_to_peak() {
        let a = AudioBuffer::from_fn(4800, 48000.0, |t| (2.0 * PI * 500.0 * t).sin()).unwrap();
        let a = a.peak_normalized(1.0);
        let v = modulate_injection(&a, &cfg("honor-10")).unwrap();
        let hi = v.values().iter().copied().fold(f64::MIN, f64::max);
        let lo = v.values().iter().copied().fold(f64::MAX, f64::min);
        assert!((hi - lo - 0.2).abs() < 1e-12);
        assert!(((hi + lo) / 2.0 - 1.45).abs() < 1e-12);
        assert!(lo > 0.0);
    }

    #[test]
    fn negative_drive_is_rejected() {
        let a = AudioBuffer::new(vec![0.0, 1.0, -1.0], 48000.0).unwrap();
        let mut c = cfg("honor-10");
        c.k = 1.45;
        assert!(matches!(
            modulate_injection(&a, &c),
            Err(ChannelError::NegativeVoltage { .. })
        ));
        c.k = 2.0;
        assert!(matches!(
            modulate_injection(&a, &c),
            Err(ChannelError::NegativeVoltage { .. })
        ));
    }

    #[test]
    fn capacitor_cutoff_must_be_below_mic_nyquist() {
        let mut c = cfg("pixel-4xl");
        c.capacitor_cutoff = 16000.0;
        assert!(c.validate().is_err());
        c.capacitor_cutoff = 15000.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn staircase_energy_above_cutoff_drops_12db() {
        // a 1 kHz tone held for 6 samples at a time, like a slow DAC
        let rate = 48000.0;
        let stair: Vec<f64> = (0..48000)
            .map(|n| {
                let held = (n / 6 * 6) as f64;
                1.45 + 0.1 * (2.0 * PI * 1000.0 * held / rate).sin()
            })
            .collect();
        let t = VoltageTrace::new(stair, rate).unwrap();
        let cutoff = 1500.0;
        let s = capacitor_smooth(&t, cutoff).unwrap();
        let energy_above = |x: &[f64]| {
            let ac: Vec<f64> = x.iter().map(|v| v - 1.45).collect();
            let spec = magnitude_spectrum(&ac);
            let bw = rate / ac.len() as f64;
            spec.iter()
                .enumerate()
                .filter(|(k, _)| *k as f64 * bw > cutoff)
                .map(|(_, m)| m * m)
                .sum::<f64>()
        };
        let before = energy_above(t.values());
        let after = energy_above(s.values());
        assert!(10.0 * (before / after).log10() >= 12.0);
    }

    #[test]
    fn capacitor_has_unit_dc_gain() {
        let t = VoltageTrace::new(vec![1.45; 1000], 48000.0).unwrap();
        let s = capacitor_smooth(&t, 10000.0).unwrap();
        assert!(s.values().iter().all(|v| (v / 1.45 - 1.0).abs() < 1e-3));
        assert!(capacitor_smooth(&t, 24000.0).is_err());
    }

    #[test]
    fn round_trip_without_smoothing() {
        let a = AudioBuffer::from_fn(48000, 48000.0, |t| {
            0.5 * (2.0 * PI * 300.0 * t).sin() + 0.3 * (2.0 * PI * 2100.0 * t).sin()
        })
        .unwrap();
        for slug in ["honor-10", "note-10", "pixel-4xl"] {
            let c = cfg(slug);
            let rec = phone_record_injected(&modulate_injection(&a, &c).unwrap(), &c).unwrap();
            let back = resample(&rec, 48000.0).unwrap();
            let r = pearson(&back.samples()[500..47000], &a.samples()[500..47000]);
            assert!(r >= 0.999, "{slug}: {r}");
        }
    }
}
