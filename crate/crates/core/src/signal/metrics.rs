use std::ops::Range;

use super::{AudioBuffer, SignalError};

/// Mean squared amplitude.
pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Mean squared deviation from the mean.
pub fn ac_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn rms(x: &[f64]) -> f64 {
    mean_power(x).sqrt()
}

/// `10 log10(signal / noise)`.
pub fn snr_db(signal_power: f64, noise_power: f64) -> Result<f64, SignalError> {
    if !(noise_power > 0.0) {
        return Err(SignalError::ZeroNoisePower);
    }
    if !(signal_power >= 0.0) {
        return Err(SignalError::InvalidPower(signal_power));
    }
    Ok(10.0 * (signal_power / noise_power).log10())
}

/// SNR between an annotated signal segment and an annotated idle segment of one recording.
pub fn segment_snr_db(buffer: &AudioBuffer, signal: Range<usize>, noise: Range<usize>) -> Result<f64, SignalError> {
    let x = buffer.samples();
    if signal.end > x.len() || noise.end > x.len() || signal.is_empty() || noise.is_empty() {
        return Err(SignalError::InvalidSegment);
    }
    snr_db(mean_power(&x[signal]), mean_power(&x[noise]))
}

/// Pearson correlation over the common prefix of `a` and `b`. Zero when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Fidelity of `recorded` to `reference`: the reference is fit to the recording
/// by least squares and whatever the fit leaves over counts as noise.
/// Returns `(signal_power, noise_power)` over the common prefix.
pub fn fit_residual_powers(reference: &[f64], recorded: &[f64]) -> (f64, f64) {
    let n = reference.len().min(recorded.len());
    let (r, y) = (&reference[..n], &recorded[..n]);
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let ry: f64 = r.iter().zip(y).map(|(a, b)| a * b).sum();
    let g = if rr > 0.0 { ry / rr } else { 0.0 };
    let signal = g * g * rr / n.max(1) as f64;
    let noise = r.iter().zip(y).map(|(a, b)| (b - g * a) * (b - g * a)).sum::<f64>() / n.max(1) as f64;
    (signal, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn equal_power_is_zero_db() {
        assert_eq!(snr_db(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn tenfold_amplitude_is_20_db() {
        let s = vec![1.0, -1.0, 1.0, -1.0];
        let n = vec![0.1, -0.1, 0.1, -0.1];
        let v = snr_db(mean_power(&s), mean_power(&n)).unwrap();
        assert!((v - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_is_an_error() {
        assert!(matches!(snr_db(1.0, 0.0), Err(SignalError::ZeroNoisePower)));
    }

    #[test]
    fn constructed_mixture_recovers_target_snr() {
        // speech-like tone segment followed by an idle segment; noise runs throughout
        let target = 5.75;
        let rate = 8000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = (0..16000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tone: Vec<f64> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * 440.0 * n as f64 / rate).sin())
            .collect();
        let gain = (10f64.powf(target / 10.0) * mean_power(&noise[..8000]) / mean_power(&tone)).sqrt();
        // signal segment holds signal+noise, so subtract the idle estimate from it
        let mixed: Vec<f64> = (0..16000)
            .map(|i| noise[i] + if i < 8000 { gain * tone[i] } else { 0.0 })
            .collect();
        let buf = AudioBuffer::new(mixed, rate).unwrap();
        let p_total = mean_power(&buf.samples()[..8000]);
        let p_idle = mean_power(&buf.samples()[8000..]);
        let est = snr_db(p_total - p_idle, p_idle).unwrap();
        assert!((est - target).abs() < 0.5, "{est}");
        let raw = segment_snr_db(&buf, 0..8000, 8000..16000).unwrap();
        assert!(raw > est);
    }

    #[test]
    fn fit_residual_of_scaled_copy_is_zero() {
        let r: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let y: Vec<f64> = r.iter().map(|v| 0.5 * v).collect();
        let (s, n) = fit_residual_powers(&r, &y);
        assert!(n < 1e-20 && s > 0.0);
        assert!((pearson(&r, &y) - 1.0).abs() < 1e-12);
    }
}
