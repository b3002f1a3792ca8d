//! Eavesdropping on the speaker wire: the drive voltage follows the audio
//! waveform around a DC bias and is digitized by a slow ADC.

use serde::{Deserialize, Serialize};

use super::adc::{AdcConfig, AdcRange};
use super::trace::VoltageTrace;
use super::ChannelError;
use crate::signal::AudioBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EavesdropConfig {
    pub dc_offset_out: f64,
    pub adc: AdcConfig,
    pub speaker_resistance: f64,
}

impl Default for EavesdropConfig {
    fn default() -> Self {
        Self {
            dc_offset_out: 1.5,
            adc: AdcConfig::new(10_000.0, 12, AdcRange::Fixed { min: 0.0, max: 3.3 }),
            speaker_resistance: 20.0,
        }
    }
}

impl EavesdropConfig {
    pub const DEFAULT_K: f64 = 1.0;

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.dc_offset_out > 0.0 && self.dc_offset_out.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "dc_offset_out = {}",
                self.dc_offset_out
            )));
        }
        if !(8..=16).contains(&self.adc.bits) {
            return Err(ChannelError::InvalidParameter(format!(
                "eavesdrop ADC bits must lie in [8, 16], got {}",
                self.adc.bits
            )));
        }
        self.adc.validate()
    }
}

/// `V_o(t) = k x(t) + dc_offset_out`.
pub fn speaker_wire_voltage(audio: &AudioBuffer, cfg: &EavesdropConfig, k: f64) -> Result<VoltageTrace, ChannelError> {
    cfg.validate()?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(ChannelError::InvalidParameter(format!("k = {k}")));
    }
    let swing = k * audio.peak();
    if swing >= cfg.dc_offset_out {
        return Err(ChannelError::NegativeVoltage {
            swing,
            offset: cfg.dc_offset_out,
        });
    }
    let v = audio.samples().iter().map(|x| k * x + cfg.dc_offset_out).collect();
    VoltageTrace::new(v, audio.rate())
}

/// `x_e(t) = (V_o(t) - dc_offset_out) / k` with `k = max |V_o - dc_offset_out|`,
/// so the result peaks at exactly 1.
pub fn demodulate_eavesdrop(trace: &VoltageTrace, cfg: &EavesdropConfig) -> Result<AudioBuffer, ChannelError> {
    let first = trace.values().first().copied();
    if trace.values().iter().all(|&v| Some(v) == first) {
        return Err(ChannelError::DegenerateTrace);
    }
    let centred: Vec<f64> = trace.values().iter().map(|v| v - cfg.dc_offset_out).collect();
    let k = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if k == 0.0 {
        return Err(ChannelError::DegenerateTrace);
    }
    Ok(AudioBuffer::new(centred.iter().map(|v| v / k).collect(), trace.rate())?)
}
