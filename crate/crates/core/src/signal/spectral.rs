//! Short-time Fourier analysis and weighted overlap-add synthesis.

use std::f64::consts::PI;

use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

use super::{AudioBuffer, SignalError};

/// Frame layout shared by [`stft`] and [`istft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StftGeometry {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
}

impl StftGeometry {
    pub fn new(window_len: usize, hop: usize, fft_len: usize) -> Result<Self, SignalError> {
        let g = Self {
            window_len,
            hop,
            fft_len,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(SignalError::InvalidGeometry(format!(
                "need 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop, self.window_len, self.fft_len
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// `floor((n - window) / hop) + 1`, or zero when `n < window`.
    pub fn frames_for(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            (n - self.window_len) / self.hop + 1
        }
    }
}

/// Magnitude spectrogram, `frames x bins`, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    frames: usize,
    bins: usize,
    /// Seconds between frame starts.
    pub frame_hop: f64,
    /// Hz per bin.
    pub bin_width: f64,
    pub origin_rate: f64,
}

impl Spectrogram {
    pub fn new(
        magnitudes: Vec<f64>,
        frames: usize,
        bins: usize,
        frame_hop: f64,
        bin_width: f64,
        origin_rate: f64,
    ) -> Result<Self, SignalError> {
        if magnitudes.len() != frames * bins {
            return Err(SignalError::InvalidGeometry(format!(
                "{} values for {frames} x {bins}",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(SignalError::InvalidGeometry(
                "magnitudes must be finite and >= 0".into(),
            ));
        }
        if bin_width > 0.0 && bins as f64 > origin_rate / (2.0 * bin_width) + 1.0 + 1e-9 {
            return Err(SignalError::InvalidGeometry(
                "more bins than the Nyquist band holds".into(),
            ));
        }
        Ok(Self {
            magnitudes,
            frames,
            bins,
            frame_hop,
            bin_width,
            origin_rate,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.magnitudes[i * self.bins..(i + 1) * self.bins]
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.bins + bin]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Index of the strongest bin in each frame (lowest index wins ties).
    pub fn argmax_bins(&self) -> Vec<usize> {
        (0..self.frames).map(|i| argmax(self.frame(i))).collect()
    }
}

/// Complex STFT that keeps enough geometry to be inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Vec<Complex<f64>>,
    pub frames: usize,
    pub geometry: StftGeometry,
    pub rate: f64,
    pub signal_len: usize,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.geometry.bins()
    }

    pub fn frame(&self, i: usize) -> &[Complex<f64>] {
        let b = self.bins();
        &self.data[i * b..(i + 1) * b]
    }

    pub fn magnitude(&self) -> Spectrogram {
        Spectrogram {
            magnitudes: self.data.iter().map(|c| c.norm()).collect(),
            frames: self.frames,
            bins: self.bins(),
            frame_hop: self.geometry.hop as f64 / self.rate,
            bin_width: self.rate / self.geometry.fft_len as f64,
            origin_rate: self.rate,
        }
    }

    /// Replaces every magnitude while keeping this spectrogram's phase.
    pub fn with_magnitudes(&self, mags: &[f64]) -> Result<Self, SignalError> {
        if mags.len() != self.data.len() {
            return Err(SignalError::InvalidGeometry(format!(
                "{} magnitudes for {} cells",
                mags.len(),
                self.data.len()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(mags)
            .map(|(c, &m)| {
                let n = c.norm();
                if n > 0.0 {
                    c * (m / n)
                } else {
                    Complex::new(m, 0.0)
                }
            })
            .collect();
        Ok(Self { data, ..self.clone() })
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

pub fn stft_complex(buffer: &AudioBuffer, geometry: StftGeometry) -> Result<ComplexSpectrogram, SignalError> {
    geometry.validate()?;
    let x = buffer.samples();
    if x.len() < geometry.window_len {
        return Err(SignalError::TooShort {
            len: x.len(),
            needed: geometry.window_len,
        });
    }
    let frames = geometry.frames_for(x.len());
    let window = hann(geometry.window_len);
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(geometry.fft_len);
    let mut scratch = fft.make_scratch_vec();
    let mut input = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let mut data = Vec::with_capacity(frames * geometry.bins());
    for m in 0..frames {
        let start = m * geometry.hop;
        input.iter_mut().for_each(|v| *v = 0.0);
        for (j, w) in window.iter().enumerate() {
            input[j] = x[start + j] * w;
        }
        fft.process_with_scratch(&mut input, &mut spectrum, &mut scratch)
            .expect("buffer sizes come from the planner");
        data.extend_from_slice(&spectrum);
    }
    Ok(ComplexSpectrogram {
        data,
        frames,
        geometry,
        rate: buffer.rate(),
        signal_len: x.len(),
    })
}

/// Hann-windowed magnitude spectrogram.
pub fn stft(buffer: &AudioBuffer, window_len: usize, hop: usize, fft_len: usize) -> Result<Spectrogram, SignalError> {
    let geometry = StftGeometry::new(window_len, hop, fft_len)?;
    Ok(stft_complex(buffer, geometry)?.magnitude())
}

/// Weighted overlap-add inverse. Samples whose accumulated window energy is
/// under a thousandth of the peak (the first and last partial hop) are zero.
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioBuffer, SignalError> {
    let g = spec.geometry;
    g.validate()?;
    if spec.data.len() != spec.frames * g.bins() {
        return Err(SignalError::InvalidGeometry(format!(
            "{} cells but {} frames x {} bins",
            spec.data.len(),
            spec.frames,
            g.bins()
        )));
    }
    if spec.frames > 0 && spec.signal_len < g.window_len + (spec.frames - 1) * g.hop {
        return Err(SignalError::InvalidGeometry(format!(
            "{} frames do not fit in {} samples",
            spec.frames, spec.signal_len
        )));
    }
    if spec.frames != g.frames_for(spec.signal_len) {
        return Err(SignalError::InvalidGeometry(format!(
            "{} frames but a {}-sample signal yields {}",
            spec.frames,
            spec.signal_len,
            g.frames_for(spec.signal_len)
        )));
    }

    let window = hann(g.window_len);
    let mut planner = RealFftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(g.fft_len);
    let mut scratch = ifft.make_scratch_vec();
    let mut spectrum = ifft.make_input_vec();
    let mut frame = ifft.make_output_vec();
    let mut out = vec![0.0; spec.signal_len];
    let mut wsum = vec![0.0; spec.signal_len];
    let norm = 1.0 / g.fft_len as f64;
    let last = g.bins() - 1;
    for m in 0..spec.frames {
        spectrum.copy_from_slice(spec.frame(m));
        spectrum[0].im = 0.0;
        if g.fft_len.is_multiple_of(2) {
            spectrum[last].im = 0.0;
        }
        ifft.process_with_scratch(&mut spectrum, &mut frame, &mut scratch)
            .expect("buffer sizes come from the planner");
        let start = m * g.hop;
        for (j, w) in window.iter().enumerate() {
            out[start + j] += frame[j] * norm * w;
            wsum[start + j] += w * w;
        }
    }
    let peak = wsum.iter().cloned().fold(0.0, f64::max);
    for (v, w) in out.iter_mut().zip(&wsum) {
        *v = if *w > 1e-3 * peak { *v / w } else { 0.0 };
    }
    AudioBuffer::new(out, spec.rate)
}

pub(crate) fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Hann-windowed magnitude spectrum of the whole signal; bin `k` is `k * rate / len` Hz.
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut input: Vec<f64> = x.iter().zip(hann(n)).map(|(a, w)| a * w).collect();
    let mut out = fft.make_output_vec();
    fft.process(&mut input, &mut out).expect("sizes from planner");
    out.iter().map(|c| c.norm()).collect()
}

/// Frequency of the strongest spectral line and the bin width, both in Hz.
pub fn peak_frequency(x: &[f64], rate: f64) -> (f64, f64) {
    let spec = magnitude_spectrum(x);
    let bw = rate / x.len() as f64;
    (argmax(&spec) as f64 * bw, bw)
}
