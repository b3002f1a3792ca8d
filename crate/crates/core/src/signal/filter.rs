//! Butterworth high/low-pass filters as cascaded second-order sections, and
//! the single-pole RC smoother.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AudioBuffer, SignalError};

pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    HighPass,
    LowPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub cutoff: f64,
    pub order: usize,
}

impl FilterSpec {
    pub fn high_pass(cutoff: f64) -> Self {
        Self {
            kind: FilterKind::HighPass,
            cutoff,
            order: DEFAULT_ORDER,
        }
    }

    pub fn low_pass(cutoff: f64) -> Self {
        Self {
            kind: FilterKind::LowPass,
            cutoff,
            order: DEFAULT_ORDER,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn validate(&self, rate: f64) -> Result<(), SignalError> {
        if self.order == 0 {
            return Err(SignalError::InvalidFilter("order must be positive".into()));
        }
        if !(self.cutoff > 0.0 && self.cutoff < rate / 2.0) {
            return Err(SignalError::CutoffAboveNyquist {
                cutoff: self.cutoff,
                nyquist: rate / 2.0,
            });
        }
        Ok(())
    }

    pub fn design(&self, rate: f64) -> Result<Cascade, SignalError> {
        self.validate(rate)?;
        Ok(Cascade::butterworth(self.kind, self.cutoff, self.order, rate))
    }
}

/// One section `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        // transposed direct form II
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * y + s2;
            s2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }

    /// Complex gain at `f` Hz for sampling rate `rate`, as (re, im).
    fn response(&self, f: f64, rate: f64) -> (f64, f64) {
        let w = 2.0 * PI * f / rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        ((num.0 * den.0 + num.1 * den.1) / d, (num.1 * den.0 - num.0 * den.1) / d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub sections: Vec<Biquad>,
}

impl Cascade {
    /// Bilinear-transform Butterworth design with prewarped cutoff.
    pub fn butterworth(kind: FilterKind, cutoff: f64, order: usize, rate: f64) -> Self {
        let k = (PI * cutoff / rate).tan();
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for i in 0..order / 2 {
            // pole pair angle for a unit-cutoff analog prototype
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let q_inv = 2.0 * theta.sin();
            let norm = 1.0 / (1.0 + q_inv * k + k * k);
            let a = [2.0 * (k * k - 1.0) * norm, (1.0 - q_inv * k + k * k) * norm];
            let b = match kind {
                FilterKind::LowPass => {
                    let g = k * k * norm;
                    [g, 2.0 * g, g]
                }
                FilterKind::HighPass => [norm, -2.0 * norm, norm],
            };
            sections.push(Biquad { b, a });
        }
        if order % 2 == 1 {
            let norm = 1.0 / (1.0 + k);
            let a = [(k - 1.0) * norm, 0.0];
            let b = match kind {
                FilterKind::LowPass => [k * norm, k * norm, 0.0],
                FilterKind::HighPass => [norm, -norm, 0.0],
            };
            sections.push(Biquad { b, a });
        }
        Self { sections }
    }

    pub fn run(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Magnitude response at `f` Hz.
    pub fn gain(&self, f: f64, rate: f64) -> f64 {
        let (mut re, mut im) = (1.0, 0.0);
        for s in &self.sections {
            let (r, i) = s.response(f, rate);
            (re, im) = (re * r - im * i, re * i + im * r);
        }
        (re * re + im * im).sqrt()
    }
}

/// Zero-state LTI filtering; output has the input's length.
pub fn apply_filter(buffer: &AudioBuffer, spec: &FilterSpec) -> Result<AudioBuffer, SignalError> {
    let cascade = spec.design(buffer.rate())?;
    let mut out = buffer.samples().to_vec();
    cascade.run(&mut out);
    AudioBuffer::new(out, buffer.rate())
}

/// Single-pole RC low-pass, discretized by impulse invariance so the impulse
/// response decays with time constant `1 / (2 pi cutoff)` and DC gain is 1.
/// The state starts at the first input value.
pub fn rc_lowpass(x: &[f64], cutoff: f64, rate: f64) -> Vec<f64> {
    let alpha = 1.0 - (-2.0 * PI * cutoff / rate).exp();
    let mut state = x.first().copied().unwrap_or(0.0);
    x.iter()
        .map(|&v| {
            state += alpha * (v - state);
            state
        })
        .collect()
}
