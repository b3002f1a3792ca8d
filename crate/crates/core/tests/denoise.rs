use std::f64::consts::PI;

use powerleak::channel::{synthesize_components, CurrentTrace, PowerlineConfig, ProfileRegistry};
use powerleak::classifier::synth::{synthesize_digit, voices};
use powerleak::denoise::{denoise_trace, estimate_noise, recover_primitive, spectral_subtract, DenoiseConfig};
use powerleak::signal::metrics::fit_residual_powers;
use powerleak::signal::{mean_power, pearson, AudioBuffer};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn honor() -> PowerlineConfig {
    PowerlineConfig::for_device(ProfileRegistry::builtin().get("honor-10").unwrap())
}

fn nine() -> AudioBuffer {
    let v = &voices(2, 0)[0];
    synthesize_digit(9, v, 0, 11, 8000.0).unwrap()
}

#[test]
fn leaked_nine_is_recovered_with_doubled_frequency_content() {
    let cfg = honor();
    let audio = nine();
    let parts = synthesize_components(&audio, &cfg, 1.0, 5).unwrap();
    let trace = CurrentTrace::new(parts.sum(), parts.rate).unwrap();
    let x = recover_primitive(&trace, 50.0).unwrap();
    assert!((x.peak() - 1.0).abs() < 1e-12);
    let seg = parts.playback.clone();
    let squared: Vec<f64> = audio.samples().iter().map(|v| v * v).collect();
    let leaked = &x.samples()[seg.clone()];
    assert!(pearson(leaked, &parts.leaked[seg.clone()]) > 0.5);
    // the playback segment is louder than the idle lead-in
    let idle = &x.samples()[..seg.start];
    assert!(mean_power(leaked) > 2.0 * mean_power(idle));
    // the leak follows x^2, not x
    assert!(pearson(&parts.leaked[seg], &squared).abs() > 0.99);
}

#[test]
fn denoising_a_leaked_trace_raises_its_snr() {
    let cfg = honor();
    let audio = nine();
    let parts = synthesize_components(&audio, &cfg, 1.0, 9).unwrap();
    let trace = CurrentTrace::new(parts.sum(), parts.rate).unwrap();
    let seg = parts.playback.clone();
    let dc = DenoiseConfig::default();
    let raw = recover_primitive(&trace, dc.hp_cutoff).unwrap();
    let clean = denoise_trace(&trace, seg.start, &dc).unwrap();
    let reference = &parts.leaked[seg.clone()];
    let snr = |x: &[f64]| {
        let (s, n) = fit_residual_powers(reference, x);
        10.0 * (s / n).log10()
    };
    let before = snr(&raw.samples()[seg.clone()]);
    let after = snr(&clean.samples()[seg]);
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn tone_in_noise_at_zero_db_gains_six_db() {
    let rate = 8000.0;
    let n = 16000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise: Vec<f64> = (0..2 * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let tone: Vec<f64> = (0..n)
        .map(|i| 2f64.sqrt() * (2.0 * PI * 440.0 * i as f64 / rate).sin())
        .collect();
    let noisy: Vec<f64> = tone.iter().zip(&noise[n..]).map(|(t, z)| t + z).collect();
    let dc = DenoiseConfig::default();
    let profile = estimate_noise(&AudioBuffer::new(noise[..n].to_vec(), rate).unwrap(), dc.geometry).unwrap();
    let out = spectral_subtract(&AudioBuffer::new(noisy.clone(), rate).unwrap(), &profile, dc.floor).unwrap();
    let snr = |x: &[f64]| {
        let (s, e) = fit_residual_powers(&tone, x);
        10.0 * (s / e).log10()
    };
    let gain = snr(out.samples()) - snr(&noisy);
    assert!(gain >= 6.0, "{gain}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn subtraction_never_raises_energy(seed in 0u64..u64::MAX, scale in 0.01f64..10.0, over in 0.1f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idle: Vec<f64> = (0..4000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); scale * z }).collect();
        let noisy: Vec<f64> = (0..4000).map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * (z + (2.0 * PI * 300.0 * i as f64 / 8000.0).sin())
        }).collect();
        let dc = DenoiseConfig::default();
        let profile = estimate_noise(&AudioBuffer::new(idle, 8000.0).unwrap(), dc.geometry).unwrap().scaled(over);
        let out = spectral_subtract(&AudioBuffer::new(noisy.clone(), 8000.0).unwrap(), &profile, dc.floor).unwrap();
        let e_in: f64 = noisy.iter().map(|v| v * v).sum();
        let e_out: f64 = out.samples().iter().map(|v| v * v).sum();
        prop_assert!(e_out <= e_in * (1.0 + 1e-9));
    }
}
