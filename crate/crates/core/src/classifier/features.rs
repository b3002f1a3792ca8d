//! Fixed-size log-spectrogram images of one spoken digit.

use super::ClassifierError;
use crate::signal::{resample, stft, AudioBuffer};

pub const FEATURE_SIZE: usize = 130;
pub const FEATURE_RATE: f64 = 8000.0;
/// 1.04 s at 8 kHz.
pub const CLIP_SAMPLES: usize = 8320;
pub const WINDOW: usize = 256;
pub const HOP: usize = 64;
pub const FFT_LEN: usize = 512;
pub const MAX_FREQ: f64 = 2000.0;
/// Log-magnitude floor relative to the loudest bin.
pub const LOG_FLOOR: f64 = 1e-2;

/// A 130 x 130 image in `[0, 1]`. Rows run from 0 Hz (row 0) up to 2 kHz,
/// columns run forward in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature130 {
    data: Vec<f32>,
}

impl Feature130 {
    pub fn from_vec(data: Vec<f32>) -> Result<Self, ClassifierError> {
        if data.len() != FEATURE_SIZE * FEATURE_SIZE {
            return Err(ClassifierError::ShapeMismatch {
                expected: FEATURE_SIZE * FEATURE_SIZE,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ClassifierError::InvalidFeature);
        }
        Ok(Self { data })
    }

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; FEATURE_SIZE * FEATURE_SIZE],
        }
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * FEATURE_SIZE + col]
    }

    pub fn row_mean(&self, row: usize) -> f32 {
        self.data[row * FEATURE_SIZE..(row + 1) * FEATURE_SIZE]
            .iter()
            .sum::<f32>()
            / FEATURE_SIZE as f32
    }
}

pub fn featurize(audio: &AudioBuffer) -> Result<Feature130, ClassifierError> {
    if audio.is_empty() || audio.peak() == 0.0 {
        return Err(ClassifierError::DegenerateFeature);
    }
    let at_rate = resample(audio, FEATURE_RATE)?;
    let clip = at_rate.center_fit(CLIP_SAMPLES);
    if clip.peak() == 0.0 {
        return Err(ClassifierError::DegenerateFeature);
    }
    let spec = stft(&clip, WINDOW, HOP, FFT_LEN)?;
    let keep = (MAX_FREQ / spec.bin_width).floor() as usize + 1;
    let frames = spec.frames();

    // log magnitude, laid out bins x frames
    let peak = spec.as_slice().iter().copied().fold(0.0f64, f64::max);
    let floor = LOG_FLOOR * peak;
    let mut grid = vec![0.0f64; keep * frames];
    for f in 0..frames {
        let frame = spec.frame(f);
        for b in 0..keep {
            grid[b * frames + f] = (frame[b] + floor).ln();
        }
    }

    let resized = bilinear(&grid, keep, frames, FEATURE_SIZE, FEATURE_SIZE);
    let lo = resized.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = resized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(ClassifierError::DegenerateFeature);
    }
    let data = resized.iter().map(|v| ((v - lo) / (hi - lo)) as f32).collect();
    Ok(Feature130 { data })
}

/// Corner-aligned bilinear resize of a row-major `rows x cols` grid.
fn bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let x = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (x.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, x - lo as f64)
    };
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let (r0, r1, fr) = coord(r, out_rows, rows);
        for c in 0..out_cols {
            let (c0, c1, fc) = coord(c, out_cols, cols);
            let top = src[r0 * cols + c0] * (1.0 - fc) + src[r0 * cols + c1] * fc;
            let bottom = src[r1 * cols + c0] * (1.0 - fc) + src[r1 * cols + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}
