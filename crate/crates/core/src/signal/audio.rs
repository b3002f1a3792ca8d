use super::SignalError;

/// Uniformly sampled real-valued audio.
///
/// Samples are nominally in `[-1, 1]`, but the type only enforces finiteness;
/// clipping is the business of whoever writes the buffer to a fixed-point sink.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self, SignalError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SignalError::InvalidRate(rate));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self { samples, rate })
    }

    pub fn silence(len: usize, rate: f64) -> Result<Self, SignalError> {
        Self::new(vec![0.0; len], rate)
    }

    /// Builds a buffer by evaluating `f` at `t = n / rate` for `n in 0..len`.
    pub fn from_fn(len: usize, rate: f64, f: impl Fn(f64) -> f64) -> Result<Self, SignalError> {
        Self::new((0..len).map(|n| f(n as f64 / rate)).collect(), rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Returns a copy with every sample transformed by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, SignalError> {
        Self::new(self.samples.iter().map(|&s| f(s)).collect(), self.rate)
    }

    pub fn scaled(&self, gain: f64) -> Result<Self, SignalError> {
        self.map(|s| s * gain)
    }

    /// Sub-range of samples `[start, end)`, clamped to the buffer.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        Self {
            samples: self.samples[start..end].to_vec(),
            rate: self.rate,
        }
    }

    /// Rescales so that the peak magnitude is `target`. Silent buffers are returned unchanged.
    pub fn peak_normalized(&self, target: f64) -> Self {
        let peak = self.peak();
        if peak == 0.0 {
            return self.clone();
        }
        let g = target / peak;
        Self {
            samples: self.samples.iter().map(|s| s * g).collect(),
            rate: self.rate,
        }
    }

    /// Zero-pads or trims symmetrically around the centre to exactly `len` samples.
    pub fn center_fit(&self, len: usize) -> Self {
        let n = self.samples.len();
        let samples = if n >= len {
            let start = (n - len) / 2;
            self.samples[start..start + len].to_vec()
        } else {
            let pad = (len - n) / 2;
            let mut out = vec![0.0; len];
            out[pad..pad + n].copy_from_slice(&self.samples);
            out
        };
        Self {
            samples,
            rate: self.rate,
        }
    }

    /// Concatenates `other` after `self`; both must share a rate.
    pub fn concat(&self, other: &AudioBuffer) -> Result<Self, SignalError> {
        if self.rate != other.rate {
            return Err(SignalError::RateMismatch(self.rate, other.rate));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Self {
            samples,
            rate: self.rate,
        })
    }
}
