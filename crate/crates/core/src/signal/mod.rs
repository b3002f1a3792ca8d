//! Audio buffers and the DSP primitives everything else is built from.

mod audio;
pub mod filter;
pub mod metrics;
pub mod resample;
pub mod spectral;
pub mod wav;

use thiserror::Error;

pub use audio::AudioBuffer;
pub use filter::{apply_filter, FilterKind, FilterSpec};
pub use metrics::{mean_power, pearson, rms, segment_snr_db, snr_db};
pub use resample::{resample, sample_at};
pub use spectral::{istft, stft, stft_complex, ComplexSpectrogram, Spectrogram, StftGeometry};
pub use wav::{load_wav, save_wav, BitDepth, WavError, WriteReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    CutoffAboveNyquist { cutoff: f64, nyquist: f64 },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("invalid STFT geometry: {0}")]
    InvalidGeometry(String),
    #[error("signal of {len} samples is shorter than the {needed}-sample window")]
    TooShort { len: usize, needed: usize },
    #[error("noise power must be positive")]
    ZeroNoisePower,
    #[error("signal power must be non-negative, got {0}")]
    InvalidPower(f64),
    #[error("segment lies outside the buffer or is empty")]
    InvalidSegment,
}
