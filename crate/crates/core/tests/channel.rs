use std::f64::consts::{PI, TAU};

use powerleak::channel::{
    adc_sample, capacitor_smooth, demodulate_eavesdrop, modulate_injection, phone_record_injected,
    speaker_wire_voltage, synthesize_components, synthesize_current_trace, DeviceProfile, EavesdropConfig,
    InjectionConfig, PowerlineConfig, ProfileRegistry,
};
use powerleak::signal::metrics::ac_power;
use powerleak::signal::spectral::magnitude_spectrum;
use powerleak::signal::{pearson, resample, AudioBuffer};
use proptest::prelude::*;

fn device(slug: &str) -> DeviceProfile {
    ProfileRegistry::builtin().get(slug).unwrap().clone()
}

/// Three tones below 4 kHz, peak-normalized to `amp`.
fn band_limited(f: [f64; 3], phase: [f64; 3], amp: f64, n: usize, rate: f64) -> AudioBuffer {
    let x = AudioBuffer::from_fn(n, rate, |t| {
        (0..3).map(|i| (2.0 * PI * f[i] * t + phase[i]).sin()).sum()
    })
    .unwrap();
    x.peak_normalized(amp)
}

fn speechy(rate: f64) -> AudioBuffer {
    band_limited(
        [210.0, 830.0, 2300.0],
        [0.0, 1.0, 2.0],
        0.8,
        (0.5 * rate) as usize,
        rate,
    )
}

fn tones() -> impl Strategy<Value = ([f64; 3], [f64; 3], f64)> {
    (
        [80.0f64..4000.0, 80.0f64..4000.0, 80.0f64..4000.0],
        [0.0f64..TAU, 0.0f64..TAU, 0.0f64..TAU],
        0.05f64..0.95,
    )
}

#[test]
fn every_profile_records_injected_speech_above_15db() {
    let reg = ProfileRegistry::builtin();
    let x = speechy(48000.0);
    for d in reg.devices() {
        let cfg = InjectionConfig::for_device(d.clone());
        let smooth = capacitor_smooth(&modulate_injection(&x, &cfg).unwrap(), cfg.capacitor_cutoff).unwrap();
        let rec = phone_record_injected(&smooth, &cfg).unwrap();
        assert_eq!(rec.rate(), d.mic_rate);
        let back = resample(&rec, 48000.0).unwrap();
        let n = back.len().min(x.len());
        let (s, e) = powerleak::signal::metrics::fit_residual_powers(&x.samples()[..n], &back.samples()[..n]);
        let snr = 10.0 * (s / e).log10();
        assert!(snr >= 15.0, "{}: {snr}", d.slug);
    }
}

#[test]
fn honor_trace_leaks_at_its_table_snr_for_many_seeds() {
    let d = device("honor-10");
    let cfg = PowerlineConfig::for_device(&d);
    for seed in 0..8 {
        let parts = synthesize_components(&speechy(8000.0), &cfg, 1.0, seed).unwrap();
        let snr = parts.leaked_snr_db().unwrap();
        assert!((snr - 5.75).abs() <= 0.5, "seed {seed}: {snr}");
    }
}

#[test]
fn profiles_cover_the_three_microphone_rates() {
    let reg = ProfileRegistry::builtin();
    let rates: std::collections::BTreeSet<u64> = reg.devices().iter().map(|d| d.mic_rate as u64).collect();
    assert_eq!(rates.into_iter().collect::<Vec<_>>(), [32000, 44100, 48000]);
    assert_eq!(device("pixel-4xl").mic_rate, 32000.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn injection_round_trip_is_identity(t in tones()) {
        let x = band_limited(t.0, t.1, t.2, 4800, 48000.0);
        let cfg = InjectionConfig::for_device(device("iphone-x"));
        let rec = phone_record_injected(&modulate_injection(&x, &cfg).unwrap(), &cfg).unwrap();
        prop_assert!(pearson(x.samples(), rec.samples()) >= 0.999);
    }

    #[test]
    fn modulation_is_exactly_invertible(t in tones()) {
        let x = band_limited(t.0, t.1, t.2, 2000, 48000.0);
        let cfg = InjectionConfig::for_device(device("note-10"));
        let v = modulate_injection(&x, &cfg).unwrap();
        for (vi, xi) in v.values().iter().zip(x.samples()) {
            prop_assert!(*vi > 0.0);
            prop_assert!(((vi - cfg.dc_offset_in) / cfg.k - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn eavesdrop_round_trip_before_the_adc(t in tones(), k in 0.05f64..1.4) {
        let x = band_limited(t.0, t.1, t.2, 3000, 16000.0);
        let cfg = EavesdropConfig::default();
        let y = demodulate_eavesdrop(&speaker_wire_voltage(&x, &cfg, k).unwrap(), &cfg).unwrap();
        let scale = x.peak();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            prop_assert!((a / scale - b).abs() < 1e-6);
        }
    }

    #[test]
    fn eavesdrop_chain_keeps_the_band(t in tones()) {
        let x = band_limited(t.0, t.1, t.2, 8000, 16000.0);
        let cfg = EavesdropConfig::default();
        let wire = speaker_wire_voltage(&x, &cfg, EavesdropConfig::DEFAULT_K).unwrap();
        let rec = demodulate_eavesdrop(&adc_sample(&wire, &cfg.adc).unwrap().trace, &cfg).unwrap();
        let back = resample(&rec, 16000.0).unwrap();
        let n = back.len().min(x.len());
        prop_assert!(pearson(&x.samples()[..n], &back.samples()[..n]) >= 0.95);
    }

    #[test]
    fn tones_leak_at_double_frequency(f in 60.0f64..1990.0) {
        let x = AudioBuffer::from_fn(8000, 8000.0, |t| 0.9 * (2.0 * PI * f * t).sin()).unwrap();
        let trace = synthesize_current_trace(&x, &PowerlineConfig::default(), 1.0, 0).unwrap();
        let cfg = PowerlineConfig::default();
        let seg = &trace.values()[cfg.playback_start()..];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let ac: Vec<f64> = seg.iter().map(|v| v - mean).collect();
        let spec = magnitude_spectrum(&ac);
        let bw = 8000.0 / ac.len() as f64;
        let peak = (1..spec.len()).max_by(|&a, &b| spec[a].total_cmp(&spec[b])).unwrap();
        prop_assert!((peak as f64 - 2.0 * f / bw).abs() <= 1.0 + 1e-9, "{f} Hz: peak bin {peak}, want {}", 2.0 * f / bw);
    }

    #[test]
    fn louder_playback_leaks_more(v1 in 0.05f64..1.0, dv in 0.01f64..0.5, seed in 0u64..100) {
        let v2 = (v1 + dv).min(1.0);
        prop_assume!(v2 > v1);
        let cfg = PowerlineConfig::for_device(&device("note-10"));
        let x = speechy(8000.0);
        let a = synthesize_components(&x, &cfg, v1, seed).unwrap();
        let b = synthesize_components(&x, &cfg, v2, seed).unwrap();
        prop_assert!(ac_power(&b.leaked) > ac_power(&a.leaked));
    }

    #[test]
    fn traces_are_seed_deterministic(seed in 0u64..1000) {
        let cfg = PowerlineConfig::for_device(&device("pocophone"));
        let x = speechy(8000.0);
        let a = synthesize_current_trace(&x, &cfg, 0.7, seed).unwrap();
        prop_assert_eq!(&a, &synthesize_current_trace(&x, &cfg, 0.7, seed).unwrap());
        prop_assert_ne!(&a, &synthesize_current_trace(&x, &cfg, 0.7, seed + 1).unwrap());
    }
}
