//! One utterance through one channel.

use sha2::{Digest, Sha256};

use super::{cell_seed, HarnessError};
use crate::channel::adc::quantize;
use crate::channel::noise::{stream, unit_noise, NoiseShape};
use crate::channel::{
    adc_sample, capacitor_smooth, demodulate_eavesdrop, modulate_injection, phone_record_injected,
    speaker_wire_voltage, synthesize_components, CurrentTrace, DeviceProfile, EavesdropConfig, InjectionConfig,
    NoiseSynthSpec, PowerlineConfig,
};
use crate::classifier::{featurize, Example, Feature130, Utterance};
use crate::denoise::{denoise_trace, DenoiseConfig};
use crate::signal::metrics::{fit_residual_powers, mean_power};
use crate::signal::{pearson, resample, AudioBuffer};

/// Rate of the attacker's drive signal.
pub const ATTACK_RATE: f64 = 48000.0;
/// Band kept by the eavesdropping reference.
pub const EAVESDROP_BAND: f64 = 5000.0;
/// Resolution of the air-recording reference.
pub const AIR_BITS: u32 = 16;

fn snr(signal: f64, noise: f64) -> f64 {
    if noise > 0.0 {
        10.0 * (signal / noise).log10()
    } else {
        f64::INFINITY
    }
}

fn ratio_db(reference: &[f64], recorded: &[f64]) -> f64 {
    let (s, n) = fit_residual_powers(reference, recorded);
    snr(s, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionTrial {
    /// What the phone recorded, at its microphone rate.
    pub recorded: AudioBuffer,
    /// Against the reference at the attack rate; lost bandwidth counts as noise.
    pub snr_db: f64,
    pub correlation: f64,
}

/// Modulate, smooth with the coupling capacitor and record on `device`.
pub fn injection_trial(
    audio: &AudioBuffer,
    device: &DeviceProfile,
    k: Option<f64>,
) -> Result<InjectionTrial, HarnessError> {
    let mut cfg = InjectionConfig::for_device(device.clone());
    if let Some(k) = k {
        cfg.k = k;
    }
    let reference = if audio.rate() == ATTACK_RATE {
        audio.clone()
    } else {
        resample(audio, ATTACK_RATE)?
    };
    let drive = modulate_injection(&reference, &cfg)?;
    let smooth = capacitor_smooth(&drive, cfg.capacitor_cutoff)?;
    let recorded = phone_record_injected(&smooth, &cfg)?;
    let back = resample(&recorded, ATTACK_RATE)?;
    let n = back.len().min(reference.len());
    Ok(InjectionTrial {
        snr_db: ratio_db(&reference.samples()[..n], &back.samples()[..n]),
        correlation: pearson(&reference.samples()[..n], &back.samples()[..n]),
        recorded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EavesdropTrial {
    /// Demodulated audio at the ADC rate.
    pub recovered: AudioBuffer,
    /// Against the full-band reference.
    pub snr_db: f64,
    /// Against the reference low-passed to the speech band.
    pub band_correlation: f64,
    pub clipped: usize,
}

pub fn eavesdrop_trial(audio: &AudioBuffer, cfg: &EavesdropConfig) -> Result<EavesdropTrial, HarnessError> {
    let wire = speaker_wire_voltage(audio, cfg, EavesdropConfig::DEFAULT_K)?;
    let sampled = adc_sample(&wire, &cfg.adc)?;
    let recovered = demodulate_eavesdrop(&sampled.trace, cfg)?;
    let back = resample(&recovered, audio.rate())?;
    let n = back.len().min(audio.len());
    // linear-phase band limit through a round trip at twice the band edge
    let band = if EAVESDROP_BAND < audio.rate() / 2.0 {
        resample(&resample(audio, 2.0 * EAVESDROP_BAND)?, audio.rate())?
    } else {
        audio.clone()
    };
    Ok(EavesdropTrial {
        snr_db: ratio_db(&audio.samples()[..n], &back.samples()[..n]),
        band_correlation: pearson(&band.samples()[..n], &back.samples()[..n]),
        clipped: sampled.clipped,
        recovered,
    })
}

/// An ordinary microphone recording on `device`: full bandwidth, 16-bit,
/// with optional ambient noise at `snr_db` below the playback level.
pub fn air_record(
    audio: &AudioBuffer,
    device: &DeviceProfile,
    ambient: Option<(f64, u64)>,
) -> Result<AudioBuffer, HarnessError> {
    let mut at_mic = resample(audio, device.mic_rate)?.into_samples();
    if let Some((snr_db, seed)) = ambient {
        let noise = unit_noise(NoiseShape::Pink, at_mic.len(), &mut stream(seed, 0));
        let p = mean_power(&at_mic);
        let scale = (p / 10f64.powf(snr_db / 10.0)).sqrt();
        at_mic.iter_mut().zip(&noise).for_each(|(x, n)| *x += scale * n);
    }
    let (q, _) = quantize(&at_mic, -1.0, 1.0, AIR_BITS);
    Ok(AudioBuffer::new(q, device.mic_rate)?)
}

/// SNR and correlation of an air recording against its reference.
pub fn air_fidelity(audio: &AudioBuffer, recorded: &AudioBuffer) -> Result<(f64, f64), HarnessError> {
    let back = resample(recorded, audio.rate())?;
    let n = back.len().min(audio.len());
    Ok((
        ratio_db(&audio.samples()[..n], &back.samples()[..n]),
        pearson(&audio.samples()[..n], &back.samples()[..n]),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerlineTrial {
    pub trace: CurrentTrace,
    /// Denoised playback segment at the ADC rate.
    pub recovered: AudioBuffer,
    pub feature: Feature130,
    /// Leak over firmware noise before quantization; `None` without noise.
    pub snr_db: Option<f64>,
}

pub fn powerline_config(device: &DeviceProfile, firmware_noise: bool) -> PowerlineConfig {
    let mut cfg = PowerlineConfig::for_device(device);
    if !firmware_noise {
        cfg.noise = NoiseSynthSpec::disabled();
    }
    cfg
}

/// Play `audio`, capture the charging current, denoise it and featurize the
/// playback segment.
pub fn powerline_trial(
    audio: &AudioBuffer,
    cfg: &PowerlineConfig,
    volume: f64,
    seed: u64,
    denoise: &DenoiseConfig,
) -> Result<PowerlineTrial, HarnessError> {
    let parts = synthesize_components(audio, cfg, volume, seed)?;
    let snr_db = parts.leaked_snr_db();
    let analog = CurrentTrace::new(parts.sum(), parts.rate)?;
    let trace = adc_sample(&analog, &cfg.adc)?.trace;
    let clean = denoise_trace(&trace, parts.playback.start, denoise)?;
    let recovered = clean.slice(parts.playback.start, parts.playback.end);
    let feature = featurize(&recovered)?;
    Ok(PowerlineTrial {
        trace,
        recovered,
        feature,
        snr_db,
    })
}

/// How training examples are derived from a labelled corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    /// The corpus audio itself.
    Clean,
    /// Each utterance played through the power-line channel of one of
    /// `devices` in turn, with its own noise seed.
    Channel {
        devices: Vec<DeviceProfile>,
        volume: f64,
        seed: u64,
        firmware_noise: bool,
        denoise: DenoiseConfig,
    },
}

/// Salt that keeps training noise apart from evaluation noise.
const TRAIN_SALT: u64 = 0x0074_7261_696e;

pub fn examples(corpus: &[Utterance], source: &FeatureSource) -> Result<Vec<Example>, HarnessError> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let feature = match source {
                FeatureSource::Clean => featurize(&u.audio)?,
                FeatureSource::Channel {
                    devices,
                    volume,
                    seed,
                    firmware_noise,
                    denoise,
                } => {
                    if devices.is_empty() {
                        return Err(HarnessError::Invalid(
                            "channel features need at least one device".into(),
                        ));
                    }
                    let cfg = powerline_config(&devices[i % devices.len()], *firmware_noise);
                    powerline_trial(&u.audio, &cfg, *volume, cell_seed(seed ^ TRAIN_SALT, i as u64), denoise)?.feature
                }
            };
            Ok(Example {
                feature,
                label: u.digit,
            })
        })
        .collect()
}

/// Order-sensitive SHA-256 over sample values.
pub fn digest(parts: &[&[f64]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        for v in *p {
            h.update(v.to_le_bytes());
        }
    }
    crate::classifier::checkpoint::hex(&h.finalize())
}
