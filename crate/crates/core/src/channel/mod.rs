//! Forward and inverse models of the three electrical channels: injection over
//! the microphone wire, eavesdropping over the speaker wire, and leakage into
//! the charging current of a standard cable. Each ends in an ADC model.

pub mod adc;
pub mod eavesdrop;
pub mod injection;
pub mod noise;
pub mod powerline;
pub mod profile;
pub mod trace;

use std::path::PathBuf;

use thiserror::Error;

use crate::signal::SignalError;

pub use adc::{adc_sample, AdcConfig, AdcOutput, AdcRange};
pub use eavesdrop::{demodulate_eavesdrop, speaker_wire_voltage, EavesdropConfig};
pub use injection::{capacitor_smooth, modulate_injection, phone_record_injected, InjectionConfig};
pub use noise::{NoiseCalibration, NoiseShape, NoiseSynthSpec, TouchBurst};
pub use powerline::{
    loudspeaker_power, synthesize_components, synthesize_current_trace, PowerlineComponents, PowerlineConfig,
};
pub use profile::{DeviceProfile, ProfileRegistry, Speakers};
pub use trace::{Amperes, CurrentTrace, PowerTrace, Trace, Unit, VoltageTrace, Volts, Watts};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("drive would go negative: k * max|x| = {swing} V against a {offset} V offset")]
    NegativeVoltage { swing: f64, offset: f64 },
    #[error("trace is constant; nothing to demodulate")]
    DegenerateTrace,
    #[error("value {value} at index {index} is invalid for a {unit} trace")]
    InvalidValue {
        index: usize,
        value: f64,
        unit: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("volume must lie in (0, 1], got {0}")]
    InvalidVolume(f64),
    #[error("touch burst at {start} s for {duration} s does not fit a {length} s trace")]
    BurstOutsideTrace { start: f64, duration: f64, length: f64 },
    #[error("unknown device profile `{0}`")]
    UnknownProfile(String),
    #[error("profile registry: {0}")]
    Registry(String),
    #[error("trace file {path}: {detail}")]
    TraceFormat { path: PathBuf, detail: String },
    #[error("trace file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
