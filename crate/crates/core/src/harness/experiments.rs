//! The five experiment kinds. Each `*_eval`/`*_sweep` works on audio already
//! in memory; the `run_*` wrappers load the corpus and model named by the
//! spec and write the report to its output directory.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::report::{emit_report, Report};
use super::spec::{ExperimentKind, ExperimentSpec};
use super::trials::{
    air_fidelity, air_record, digest, eavesdrop_trial, injection_trial, powerline_config, powerline_trial,
};
use super::{cell_seed, HarnessError};
use crate::channel::{DeviceProfile, EavesdropConfig};
use crate::classifier::checkpoint::hex;
use crate::classifier::dataset::list_corpus;
use crate::classifier::eval::predict_batch;
use crate::classifier::features::FEATURE_SIZE;
use crate::classifier::{load_checkpoint, load_corpus, CnnModel, ConfusionMatrix, Feature130, Utterance};
use crate::signal::{load_wav, AudioBuffer};

/// Largest accuracy rise between neighbouring volumes still called non-increasing.
pub const TREND_TOLERANCE: f64 = 0.03;

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn nonempty<T>(corpus: &[T]) -> Result<(), HarnessError> {
    if corpus.is_empty() {
        Err(HarnessError::Invalid("corpus is empty".into()))
    } else {
        Ok(())
    }
}

fn devices(spec: &ExperimentSpec) -> Result<Vec<DeviceProfile>, HarnessError> {
    spec.validate()?;
    spec.resolve_devices(&spec.registry()?)
}

fn trial(i: usize) -> String {
    format!("trial={i}")
}

fn volume_condition(v: f64) -> String {
    format!("volume={v}")
}

fn ambient_condition(level: Option<f64>) -> String {
    match level {
        None => "quiet".into(),
        Some(l) => format!("ambient={l}dB"),
    }
}

pub fn injection_eval(spec: &ExperimentSpec, audio: &[AudioBuffer]) -> Result<Report, HarnessError> {
    nonempty(audio)?;
    let devices = devices(spec)?;
    let mut report = Report::for_spec(spec);
    report.note(format!(
        "success = correlation with the reference >= {} after modulation, capacitor smoothing and recording",
        spec.success_threshold
    ));
    report.note("snr_db: least-squares fit of the reference to the recording; the residual is noise");
    let cond = "injection";
    for d in &devices {
        let (mut snrs, mut corrs, mut ok) = (Vec::new(), Vec::new(), 0usize);
        for (i, a) in audio.iter().enumerate() {
            match injection_trial(a, d, spec.injection_k) {
                Ok(t) => {
                    ok += usize::from(t.correlation >= spec.success_threshold);
                    snrs.push(t.snr_db);
                    corrs.push(t.correlation);
                }
                Err(e) => report.error(&d.slug, &trial(i), &e.to_string()),
            }
        }
        if let Some(s) = mean(&snrs) {
            report.push(&d.slug, cond, "snr_db", s);
            report.push(&d.slug, cond, "correlation", mean(&corrs).unwrap_or(0.0));
        }
        report.push(&d.slug, cond, "success_rate", ok as f64 / audio.len() as f64);
    }
    Ok(report)
}

pub fn eavesdrop_eval(spec: &ExperimentSpec, audio: &[AudioBuffer]) -> Result<Report, HarnessError> {
    nonempty(audio)?;
    let devices = devices(spec)?;
    let cfg = EavesdropConfig::default();
    let mut report = Report::for_spec(spec);
    report.note(format!(
        "speaker-wire: {} Hz, {}-bit ADC; band_correlation against the reference low-passed at 5 kHz",
        cfg.adc.rate, cfg.adc.bits
    ));
    report
        .note("air: the same audio recorded at the phone microphone rate with a 16-bit converter and no ambient noise");

    // the wire chain does not depend on the phone
    let mut wire = Vec::with_capacity(audio.len());
    for (i, a) in audio.iter().enumerate() {
        wire.push(eavesdrop_trial(a, &cfg).map_err(|e| (i, e.to_string())));
    }
    for d in &devices {
        let (mut snr, mut corr) = (Vec::new(), Vec::new());
        for r in &wire {
            match r {
                Ok(t) => {
                    snr.push(t.snr_db);
                    corr.push(t.band_correlation);
                }
                Err((i, e)) => report.error(&d.slug, &trial(*i), e),
            }
        }
        let (mut air_snr, mut air_corr) = (Vec::new(), Vec::new());
        for (i, a) in audio.iter().enumerate() {
            match air_record(a, d, None).and_then(|r| air_fidelity(a, &r)) {
                Ok((s, c)) => {
                    air_snr.push(s);
                    air_corr.push(c);
                }
                Err(e) => report.error(&d.slug, &format!("air {}", trial(i)), &e.to_string()),
            }
        }
        if let (Some(s), Some(c)) = (mean(&snr), mean(&corr)) {
            report.push(&d.slug, "speaker-wire", "snr_db", s);
            report.push(&d.slug, "speaker-wire", "band_correlation", c);
        }
        if let (Some(s), Some(c)) = (mean(&air_snr), mean(&air_corr)) {
            report.push(&d.slug, "air", "snr_db", s);
            report.push(&d.slug, "air", "correlation", c);
        }
    }
    Ok(report)
}

fn check_model(model: &CnnModel) -> Result<(), HarnessError> {
    if model.arch.input != FEATURE_SIZE {
        return Err(HarnessError::Invalid(format!(
            "model takes {0}x{0} inputs, features are {1}x{1}",
            model.arch.input, FEATURE_SIZE
        )));
    }
    Ok(())
}

/// Accuracy of one (device, volume) cell; failed trials count as misses.
fn powerline_cell(
    spec: &ExperimentSpec,
    model: &CnnModel,
    corpus: &[Utterance],
    device: &DeviceProfile,
    volume: f64,
    report: &mut Report,
) -> Result<f64, HarnessError> {
    let cfg = powerline_config(device, spec.firmware_noise);
    let cond = volume_condition(volume);
    let mut feats: Vec<(usize, Feature130)> = Vec::with_capacity(corpus.len());
    let mut snrs = Vec::new();
    for (i, u) in corpus.iter().enumerate() {
        match powerline_trial(&u.audio, &cfg, volume, cell_seed(spec.seed, i as u64), &spec.denoise) {
            Ok(t) => {
                snrs.extend(t.snr_db);
                feats.push((u.digit, t.feature));
            }
            Err(e) => report.error(&device.slug, &format!("{cond} {}", trial(i)), &e.to_string()),
        }
    }
    let refs: Vec<&Feature130> = feats.iter().map(|(_, f)| f).collect();
    let preds = if refs.is_empty() {
        Vec::new()
    } else {
        predict_batch(model, &refs)?
    };
    let confusion = ConfusionMatrix::from_pairs(
        model.arch.classes,
        feats.iter().zip(&preds).map(|((l, _), p)| (*l, p.digit)),
    );
    let accuracy = confusion.correct() as f64 / corpus.len() as f64;
    report.push(&device.slug, &cond, "accuracy", accuracy);
    if let Some(s) = mean(&snrs) {
        report.push(&device.slug, &cond, "leaked_snr_db", s);
    }
    report.attach(format!("confusion_{}_{}.csv", device.slug, cond), confusion.to_csv());
    Ok(accuracy)
}

fn powerline_notes(spec: &ExperimentSpec, report: &mut Report) {
    report.note(if spec.firmware_noise {
        "firmware noise on; noise seeds depend only on the utterance, so every device and volume sees the same noise shape"
    } else {
        "firmware noise off"
    });
    report.note(format!(
        "denoise: high-pass {} Hz, spectral floor {}, window {} hop {}",
        spec.denoise.hp_cutoff, spec.denoise.floor, spec.denoise.geometry.window_len, spec.denoise.geometry.hop
    ));
}

pub fn powerline_eval(spec: &ExperimentSpec, model: &CnnModel, corpus: &[Utterance]) -> Result<Report, HarnessError> {
    nonempty(corpus)?;
    check_model(model)?;
    let devices = devices(spec)?;
    let mut report = Report::for_spec(spec);
    powerline_notes(spec, &mut report);
    for d in &devices {
        for &v in &spec.volumes {
            powerline_cell(spec, model, corpus, d, v, &mut report)?;
        }
    }
    Ok(report)
}

pub fn volume_sweep(spec: &ExperimentSpec, model: &CnnModel, corpus: &[Utterance]) -> Result<Report, HarnessError> {
    nonempty(corpus)?;
    check_model(model)?;
    if spec.volumes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::Invalid(
            "sweep volumes must be strictly descending".into(),
        ));
    }
    let devices = devices(spec)?;
    let mut report = Report::for_spec(spec);
    powerline_notes(spec, &mut report);
    report.note(format!(
        "trend.monotone: no accuracy rise above {TREND_TOLERANCE} between neighbouring volumes"
    ));
    for d in &devices {
        let mut acc = Vec::with_capacity(spec.volumes.len());
        for &v in &spec.volumes {
            acc.push(powerline_cell(spec, model, corpus, d, v, &mut report)?);
        }
        let rise = acc.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if rise.is_finite() {
            report.push(&d.slug, "sweep", "trend.max_rise", rise);
            report.push(
                &d.slug,
                "sweep",
                "trend.monotone",
                f64::from(u8::from(rise <= TREND_TOLERANCE)),
            );
        }
        let at = |x: f64| spec.volumes.iter().position(|&v| v == x).map(|i| acc[i]);
        if let (Some(full), Some(half)) = (at(1.0), at(0.5)) {
            if full > 0.0 {
                report.push(&d.slug, "sweep", "trend.half_volume_ratio", half / full);
            }
        }
    }
    Ok(report)
}

/// Everything one device produces for the corpus under one ambient condition.
struct Scene {
    air_correlation: Vec<f64>,
    injection: String,
    eavesdrop: String,
    powerline: String,
    correct: Option<usize>,
}

fn run_scene(
    spec: &ExperimentSpec,
    model: Option<&CnnModel>,
    corpus: &[Utterance],
    device: &DeviceProfile,
    ambient: Option<f64>,
) -> Result<Scene, HarnessError> {
    let cfg = powerline_config(device, spec.firmware_noise);
    let wire = EavesdropConfig::default();
    let (mut inj, mut eav, mut pl) = (Vec::new(), Vec::new(), Vec::new());
    let mut air_correlation = Vec::with_capacity(corpus.len());
    let mut feats = Vec::with_capacity(corpus.len());
    for (i, u) in corpus.iter().enumerate() {
        let seed = cell_seed(spec.seed, i as u64);
        // ambient sound reaches the microphone and nothing else
        let air = air_record(&u.audio, device, ambient.map(|l| (spec.speech_level_db - l, seed)))?;
        air_correlation.push(air_fidelity(&u.audio, &air)?.1);
        inj.push(
            injection_trial(&u.audio, device, spec.injection_k)?
                .recorded
                .into_samples(),
        );
        eav.push(eavesdrop_trial(&u.audio, &wire)?.recovered.into_samples());
        let t = powerline_trial(&u.audio, &cfg, 1.0, seed, &spec.denoise)?;
        pl.push(t.trace.into_values());
        feats.push(t.feature);
    }
    let correct = match model {
        Some(m) => {
            let refs: Vec<&Feature130> = feats.iter().collect();
            let preds = predict_batch(m, &refs)?;
            Some(corpus.iter().zip(&preds).filter(|(u, p)| u.digit == p.digit).count())
        }
        None => None,
    };
    let hash = |v: &[Vec<f64>]| digest(&v.iter().map(|x| x.as_slice()).collect::<Vec<_>>());
    Ok(Scene {
        air_correlation,
        injection: hash(&inj),
        eavesdrop: hash(&eav),
        powerline: hash(&pl),
        correct,
    })
}

pub fn noise_sweep(
    spec: &ExperimentSpec,
    model: Option<&CnnModel>,
    corpus: &[Utterance],
) -> Result<Report, HarnessError> {
    nonempty(corpus)?;
    if let Some(m) = model {
        check_model(m)?;
    }
    if spec.acoustic_noise_levels.is_empty() {
        return Err(HarnessError::Invalid("noise sweep needs acoustic_noise_levels".into()));
    }
    let devices = devices(spec)?;
    let mut report = Report::for_spec(spec);
    report.note(format!(
        "ambient level L dB adds pink noise {} - L dB below the playback power to the air recording only",
        spec.speech_level_db
    ));
    report.note(format!(
        "air.success_rate: share of recordings correlating >= {} with the reference",
        spec.success_threshold
    ));
    report.note("electric.*_matches_quiet: 1 when the output digest equals the quiet run bit for bit");
    let n = corpus.len() as f64;
    for d in &devices {
        let quiet = match run_scene(spec, model, corpus, d, None) {
            Ok(s) => s,
            Err(e) => {
                report.error(&d.slug, "quiet", &e.to_string());
                continue;
            }
        };
        let levels: Vec<Option<f64>> = std::iter::once(None)
            .chain(spec.acoustic_noise_levels.iter().map(|&l| Some(l)))
            .collect();
        for level in levels {
            let cond = ambient_condition(level);
            let scene = if level.is_none() {
                None
            } else {
                match run_scene(spec, model, corpus, d, level) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        report.error(&d.slug, &cond, &e.to_string());
                        continue;
                    }
                }
            };
            let s = scene.as_ref().unwrap_or(&quiet);
            let ok = s
                .air_correlation
                .iter()
                .filter(|&&c| c >= spec.success_threshold)
                .count();
            report.push(&d.slug, &cond, "air.success_rate", ok as f64 / n);
            report.push(
                &d.slug,
                &cond,
                "air.correlation",
                mean(&s.air_correlation).unwrap_or(0.0),
            );
            let same = |a: &str, b: &str| f64::from(u8::from(a == b));
            report.push(
                &d.slug,
                &cond,
                "electric.injection_matches_quiet",
                same(&s.injection, &quiet.injection),
            );
            report.push(
                &d.slug,
                &cond,
                "electric.eavesdrop_matches_quiet",
                same(&s.eavesdrop, &quiet.eavesdrop),
            );
            report.push(
                &d.slug,
                &cond,
                "electric.powerline_matches_quiet",
                same(&s.powerline, &quiet.powerline),
            );
            if let Some(c) = s.correct {
                report.push(&d.slug, &cond, "powerline.accuracy", c as f64 / n);
            }
        }
    }
    Ok(report)
}

fn limited<T>(mut v: Vec<T>, limit: Option<usize>) -> Vec<T> {
    if let Some(l) = limit {
        v.truncate(l);
    }
    v
}

/// Every `.wav` in `dir`, sorted by name.
pub fn load_audio_dir(dir: &Path, limit: Option<usize>) -> Result<Vec<AudioBuffer>, HarnessError> {
    let paths = limited(list_corpus(dir)?, limit);
    if paths.is_empty() {
        return Err(HarnessError::Invalid(format!("no .wav files in {}", dir.display())));
    }
    paths.iter().map(|p| Ok(load_wav(p)?)).collect()
}

pub fn load_labelled(spec: &ExperimentSpec) -> Result<Vec<Utterance>, HarnessError> {
    Ok(limited(load_corpus(&spec.corpus)?, spec.limit))
}

/// Loads the spec's checkpoint and returns it with the SHA-256 of its bytes.
pub fn load_model(spec: &ExperimentSpec) -> Result<(CnnModel, String), HarnessError> {
    let path = spec
        .model
        .as_ref()
        .ok_or_else(|| HarnessError::Invalid(format!("{} needs a model checkpoint", spec.kind.as_str())))?;
    let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((load_checkpoint(path)?, hex(&Sha256::digest(&bytes))))
}

fn with_model_note(mut report: Report, sha: &str) -> Report {
    report.notes.insert(0, format!("model_sha256: {sha}"));
    report
}

/// Loads what the spec names and computes its report without writing it.
pub fn compute_report(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::InjectionEval => injection_eval(spec, &load_audio_dir(&spec.corpus, spec.limit)?),
        ExperimentKind::EavesdropEval => eavesdrop_eval(spec, &load_audio_dir(&spec.corpus, spec.limit)?),
        ExperimentKind::PowerlineEval => {
            let (model, sha) = load_model(spec)?;
            Ok(with_model_note(
                powerline_eval(spec, &model, &load_labelled(spec)?)?,
                &sha,
            ))
        }
        ExperimentKind::VolumeSweep => {
            let (model, sha) = load_model(spec)?;
            Ok(with_model_note(
                volume_sweep(spec, &model, &load_labelled(spec)?)?,
                &sha,
            ))
        }
        ExperimentKind::NoiseSweep => {
            let corpus = load_labelled(spec)?;
            match spec.model {
                Some(_) => {
                    let (model, sha) = load_model(spec)?;
                    Ok(with_model_note(noise_sweep(spec, Some(&model), &corpus)?, &sha))
                }
                None => noise_sweep(spec, None, &corpus),
            }
        }
    }
}

/// [`compute_report`], then writes the CSVs to the spec's output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let report = compute_report(spec)?;
    emit_report(&report, &spec.output)?;
    Ok(report)
}
