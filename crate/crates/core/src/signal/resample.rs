//! Kaiser-windowed sinc interpolation.
//!
//! The kernel spans [`KERNEL_TAPS`] samples measured at the lower of the two
//! rates, so downsampling widens the kernel in input samples. When both rates
//! are integers the fractional delays repeat with period `out / gcd(in, out)`
//! and the weights are tabulated once per phase.

use std::f64::consts::PI;

use super::{AudioBuffer, SignalError};

pub const KERNEL_TAPS: usize = 64;
pub const KAISER_BETA: f64 = 8.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
pub const ANTI_ALIAS_CUTOFF: f64 = 0.9;

const MAX_TABULATED_PHASES: u64 = 4096;

/// Band-limited rate conversion. Content above `target_rate / 2` is removed.
pub fn resample(buffer: &AudioBuffer, target_rate: f64) -> Result<AudioBuffer, SignalError> {
    check_rate(target_rate)?;
    if target_rate == buffer.rate() {
        return Ok(buffer.clone());
    }
    let ratio = target_rate / buffer.rate();
    let cutoff = ANTI_ALIAS_CUTOFF * ratio.min(1.0);
    let half = KERNEL_TAPS as f64 / 2.0 / ratio.min(1.0);
    let out = convert(buffer.samples(), buffer.rate(), target_rate, cutoff, half);
    AudioBuffer::new(out, target_rate)
}

/// Reads the band-limited reconstruction of `buffer` at instants `n / rate`
/// without any anti-alias filtering, the way a sampling ADC does. Content
/// above `rate / 2` folds back into the baseband.
pub fn sample_at(buffer: &AudioBuffer, rate: f64) -> Result<AudioBuffer, SignalError> {
    check_rate(rate)?;
    if rate == buffer.rate() {
        return Ok(buffer.clone());
    }
    let out = convert(buffer.samples(), buffer.rate(), rate, 1.0, KERNEL_TAPS as f64 / 2.0);
    AudioBuffer::new(out, rate)
}

fn check_rate(rate: f64) -> Result<(), SignalError> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(SignalError::InvalidRate(rate))
    }
}

/// Number of output samples for `n` input samples.
pub fn output_len(n: usize, in_rate: f64, out_rate: f64) -> usize {
    (n as f64 * out_rate / in_rate).round() as usize
}

fn convert(x: &[f64], in_rate: f64, out_rate: f64, cutoff: f64, half: f64) -> Vec<f64> {
    let out_len = output_len(x.len(), in_rate, out_rate);
    let reach = half.ceil() as i64;

    let integral = in_rate.fract() == 0.0 && out_rate.fract() == 0.0;
    if integral {
        let (ri, ro) = (in_rate as u64, out_rate as u64);
        let g = gcd(ri, ro);
        let phases = ro / g;
        if phases <= MAX_TABULATED_PHASES {
            let table: Vec<Vec<f64>> = (0..phases)
                .map(|p| weights(p as f64 * g as f64 / ro as f64, reach, cutoff, half))
                .collect();
            return (0..out_len as u64)
                .map(|n| {
                    let num = n * ri;
                    let base = (num / ro) as i64;
                    let phase = ((num % ro) / g) as usize;
                    dot(x, base, reach, &table[phase])
                })
                .collect();
        }
    }

    let step = in_rate / out_rate;
    (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let base = t.floor();
            let w = weights(t - base, reach, cutoff, half);
            dot(x, base as i64, reach, &w)
        })
        .collect()
}

/// Normalized weights for input offsets `-reach+1 ..= reach` around a point
/// `frac` samples past the base index.
fn weights(frac: f64, reach: i64, cutoff: f64, half: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (-reach + 1..=reach)
        .map(|j| kernel(frac - j as f64, cutoff, half))
        .collect();
    let sum: f64 = w.iter().sum();
    if sum != 0.0 {
        w.iter_mut().for_each(|v| *v /= sum);
    }
    w
}

fn dot(x: &[f64], base: i64, reach: i64, w: &[f64]) -> f64 {
    let n = x.len() as i64;
    let first = base - reach + 1;
    let lo = first.max(0);
    let hi = (base + reach).min(n - 1);
    if lo > hi {
        return 0.0;
    }
    x[lo as usize..=hi as usize]
        .iter()
        .zip(&w[(lo - first) as usize..])
        .map(|(a, b)| a * b)
        .sum()
}

fn kernel(x: f64, cutoff: f64, half: f64) -> f64 {
    if x.abs() >= half {
        return 0.0;
    }
    cutoff * sinc(cutoff * x) * kaiser(x / half, KAISER_BETA)
}

fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        (PI * u).sin() / (PI * u)
    }
}

/// Kaiser window evaluated at `r` in `[-1, 1]`.
pub fn kaiser(r: f64, beta: f64) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
