//! Sampling, range clipping and uniform mid-rise quantization.

use serde::{Deserialize, Serialize};

use super::trace::{Trace, Unit};
use super::ChannelError;
use crate::signal::sample_at;

pub const DEFAULT_BITS: u32 = 12;
pub const DEFAULT_HEADROOM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum AdcRange {
    Fixed {
        min: f64,
        max: f64,
    },
    /// Fit to the sampled span, widened by `headroom` of the span on each side.
    Auto {
        headroom: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub rate: f64,
    pub bits: u32,
    pub range: AdcRange,
}

impl AdcConfig {
    pub fn new(rate: f64, bits: u32, range: AdcRange) -> Self {
        Self { rate, bits, range }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!("ADC rate {}", self.rate)));
        }
        if !(1..=24).contains(&self.bits) {
            return Err(ChannelError::InvalidParameter(format!("ADC bits {}", self.bits)));
        }
        match self.range {
            AdcRange::Fixed { min, max } if !(max > min && min.is_finite() && max.is_finite()) => {
                Err(ChannelError::InvalidParameter(format!("ADC range [{min}, {max}]")))
            }
            AdcRange::Auto { headroom } if !(headroom >= 0.0 && headroom.is_finite()) => {
                Err(ChannelError::InvalidParameter(format!("ADC headroom {headroom}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdcOutput<U: Unit> {
    pub trace: Trace<U>,
    /// Samples that fell outside the range before quantization.
    pub clipped: usize,
    /// The range actually used, after any auto fit.
    pub min: f64,
    pub max: f64,
}

impl<U: Unit> AdcOutput<U> {
    pub fn step(&self, bits: u32) -> f64 {
        (self.max - self.min) / (1u64 << bits) as f64
    }
}

pub fn adc_sample<U: Unit>(trace: &Trace<U>, cfg: &AdcConfig) -> Result<AdcOutput<U>, ChannelError> {
    cfg.validate()?;
    let sampled = sample_at(&trace.to_audio(), cfg.rate)?.into_samples();
    let (min, max) = match cfg.range {
        AdcRange::Fixed { min, max } => (min, max),
        AdcRange::Auto { headroom } => auto_range(&sampled, headroom),
    };
    let (values, clipped) = quantize(&sampled, min, max, cfg.bits);
    Ok(AdcOutput {
        trace: Trace::new(values, cfg.rate)?,
        clipped,
        min,
        max,
    })
}

fn auto_range(x: &[f64], headroom: f64) -> (f64, f64) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 {
        headroom * span
    } else {
        (headroom * lo.abs()).max(1e-9)
    };
    (lo - pad, hi + pad)
}

/// Mid-rise quantizer: codes `0 .. 2^bits` reconstruct at the centres of their cells.
pub fn quantize(x: &[f64], min: f64, max: f64, bits: u32) -> (Vec<f64>, usize) {
    let levels = (1u64 << bits) as f64;
    let step = (max - min) / levels;
    let mut clipped = 0;
    let out = x
        .iter()
        .map(|&v| {
            if v < min || v > max {
                clipped += 1;
            }
            let code = ((v - min) / step).floor().clamp(0.0, levels - 1.0);
            min + (code + 0.5) * step
        })
        .collect();
    (out, clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::trace::VoltageTrace;
    use crate::signal::spectral::peak_frequency;
    use std::f64::consts::PI;

    #[test]
    fn midpoint_error_within_one_step() {
        let t = VoltageTrace::new(vec![1.65; 100], 10000.0).unwrap();
        let cfg = AdcConfig::new(10000.0, 16, AdcRange::Fixed { min: 0.0, max: 3.3 });
        let out = adc_sample(&t, &cfg).unwrap();
        assert_eq!(out.clipped, 0);
        for v in out.trace.values() {
            assert!((v - 1.65).abs() <= 3.3 / 65536.0);
        }
    }

    #[test]
    fn tone_aliases_when_undersampled() {
        let rate = 48000.0;
        let t = VoltageTrace::new(
            (0..24000)
                .map(|n| 1.5 + 0.5 * (2.0 * PI * 6000.0 * n as f64 / rate).sin())
                .collect(),
            rate,
        )
        .unwrap();
        let cfg = AdcConfig::new(10000.0, 12, AdcRange::Fixed { min: 0.0, max: 3.3 });
        let out = adc_sample(&t, &cfg).unwrap();
        let ac: Vec<f64> = out.trace.values().iter().map(|v| v - 1.5).collect();
        let (f, bw) = peak_frequency(&ac, 10000.0);
        assert!((f - 4000.0).abs() <= bw, "{f}");
    }

    #[test]
    fn over_range_is_clipped_and_counted() {
        let t = VoltageTrace::new(vec![1.0, 5.0, 2.0, -1.0], 100.0).unwrap();
        let cfg = AdcConfig::new(100.0, 12, AdcRange::Fixed { min: 0.0, max: 3.3 });
        let out = adc_sample(&t, &cfg).unwrap();
        assert_eq!(out.clipped, 2);
        let step = 3.3 / 4096.0;
        assert!((out.trace.values()[1] - 3.3).abs() <= step);
        assert!(out.trace.values()[3].abs() <= step);
    }

    #[test]
    fn auto_range_covers_span_with_headroom() {
        let t = VoltageTrace::new(vec![0.1, 0.2, 0.15], 100.0).unwrap();
        let cfg = AdcConfig::new(100.0, 12, AdcRange::Auto { headroom: 0.1 });
        let out = adc_sample(&t, &cfg).unwrap();
        assert!((out.min - 0.09).abs() < 1e-12 && (out.max - 0.21).abs() < 1e-12);
        assert_eq!(out.clipped, 0);
    }

    #[test]
    fn invalid_configs() {
        let t = VoltageTrace::new(vec![0.0; 4], 100.0).unwrap();
        for cfg in [
            AdcConfig::new(0.0, 12, AdcRange::Auto { headroom: 0.1 }),
            AdcConfig::new(100.0, 0, AdcRange::Auto { headroom: 0.1 }),
            AdcConfig::new(100.0, 12, AdcRange::Fixed { min: 1.0, max: 1.0 }),
        ] {
            assert!(adc_sample(&t, &cfg).is_err());
        }
    }
}
