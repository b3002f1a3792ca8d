use std::fs;
use std::path::{Path, PathBuf};

use powerleak::channel::{CurrentTrace, DeviceProfile, EavesdropConfig, ProfileRegistry};
use powerleak::classifier::checkpoint::LABELS;
use powerleak::classifier::synth::{write_corpus, CorpusSpec};
use powerleak::classifier::{evaluate, featurize, load_checkpoint, load_corpus, predict, CnnModel};
use powerleak::denoise::{estimate_noise, recover_primitive, spectral_subtract, DenoiseConfig};
use powerleak::harness::experiments::load_model;
use powerleak::harness::trials::{
    digest, eavesdrop_trial, examples, injection_trial, powerline_config, powerline_trial, FeatureSource,
};
use powerleak::harness::{
    cell_seed, compute_report, eavesdrop_eval, emit_report, injection_eval, run_training, ExperimentKind,
    ExperimentSpec, HarnessError, Report, TrainSpec,
};
use powerleak::signal::{load_wav, save_wav, AudioBuffer, BitDepth};

use crate::{
    ClassifyArgs, Cli, Command, Common, CorpusArgs, DenoiseArgs, EvalArgs, InjectArgs, PowerlineArgs, ProfilesAction,
    SourceArgs, SweepArgs, SweepKind, TrainArgs,
};

type Outcome = Result<(), HarnessError>;

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn single_volume(common: &Common) -> Result<f64, HarnessError> {
    match common.volumes.as_slice() {
        [] => Ok(1.0),
        [v] => Ok(*v),
        _ => Err(invalid("this command takes a single --volume")),
    }
}

pub fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    match &cli.command {
        Command::Corpus(a) => corpus(c, a),
        Command::Profiles {
            action: ProfilesAction::List { registry },
        } => profiles(registry.as_deref()),
        Command::Inject(a) => inject(c, a),
        Command::Eavesdrop(a) => eavesdrop(c, a),
        Command::Powerline(a) => powerline(c, a),
        Command::Denoise(a) => denoise(c, a),
        Command::Train(a) => train(c, a),
        Command::Classify(a) => classify(c, a),
        Command::Eval(a) => eval(c, a),
        Command::Sweep(a) => sweep(c, a),
    }
}

struct Overrides<'a> {
    corpus: Option<&'a Path>,
    model: Option<&'a Path>,
    limit: Option<usize>,
    registry: Option<&'a Path>,
    no_noise: bool,
}

/// The config file's spec, or a fresh one of the first allowed kind.
fn base_spec(
    common: &Common,
    allowed: &[ExperimentKind],
    corpus: Option<&Path>,
) -> Result<ExperimentSpec, HarnessError> {
    match &common.config {
        Some(path) => {
            let spec = ExperimentSpec::read(path)?;
            if !allowed.contains(&spec.kind) {
                return Err(invalid(format!(
                    "{} cannot run a {} config",
                    path.display(),
                    spec.kind.as_str()
                )));
            }
            Ok(spec)
        }
        None => {
            let corpus = corpus.ok_or_else(|| invalid("give --config or an input corpus"))?;
            Ok(ExperimentSpec::new(allowed[0], corpus))
        }
    }
}

fn apply(spec: &mut ExperimentSpec, common: &Common, o: &Overrides) {
    if let Some(c) = o.corpus {
        spec.corpus = c.to_path_buf();
    }
    if let Some(m) = o.model {
        spec.model = Some(m.to_path_buf());
    }
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if let Some(d) = &common.out {
        spec.output = d.clone();
    }
    if !common.profiles.is_empty() {
        spec.devices = common.profiles.clone();
    }
    if !common.volumes.is_empty() {
        spec.volumes = common.volumes.clone();
    }
    if o.limit.is_some() {
        spec.limit = o.limit;
    }
    if let Some(r) = o.registry {
        spec.profiles = Some(r.to_path_buf());
    }
    if o.no_noise {
        spec.firmware_noise = false;
    }
}

/// Config plus flags, validated once everything is in place.
fn experiment(
    common: &Common,
    allowed: &[ExperimentKind],
    o: Overrides,
    extra: impl FnOnce(&mut ExperimentSpec),
) -> Result<ExperimentSpec, HarnessError> {
    let mut spec = base_spec(common, allowed, o.corpus)?;
    apply(&mut spec, common, &o);
    extra(&mut spec);
    spec.validate()?;
    registry_devices(&spec)?;
    Ok(spec)
}

fn source_overrides(s: &SourceArgs) -> Overrides<'_> {
    Overrides {
        corpus: s.input.as_deref(),
        model: None,
        limit: s.limit,
        registry: s.registry.as_deref(),
        no_noise: false,
    }
}

fn announce(report: &Report, written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
    if report.error_count() > 0 {
        eprintln!(
            "{} cell(s) failed; see the notes in the report header",
            report.error_count()
        );
    }
}

fn finish(report: Report, dir: &Path) -> Outcome {
    let written = emit_report(&report, dir)?;
    announce(&report, &written);
    Ok(())
}

fn registry_devices(spec: &ExperimentSpec) -> Result<Vec<DeviceProfile>, HarnessError> {
    spec.resolve_devices(&spec.registry()?)
}

fn save(audio: &AudioBuffer, path: &Path) -> Outcome {
    save_wav(audio, path, BitDepth::Float32)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn corpus(common: &Common, a: &CorpusArgs) -> Outcome {
    let spec = CorpusSpec {
        voices: a.voices,
        takes: a.takes,
        rate: a.rate,
        seed: common.seed.unwrap_or(0),
    };
    let dir = out_dir(common);
    let paths = write_corpus(&spec, &dir)?;
    println!("wrote {} utterances to {}", paths.len(), dir.display());
    Ok(())
}

fn profiles(registry: Option<&Path>) -> Outcome {
    let reg = match registry {
        Some(p) => ProfileRegistry::load(p)?,
        None => ProfileRegistry::builtin(),
    };
    println!(
        "{:<14} {:<18} {:>8} {:>14} {:>11} {:>9}",
        "slug", "name", "mic_hz", "injection_db", "leaked_db", "accuracy"
    );
    for d in reg.devices() {
        println!(
            "{:<14} {:<18} {:>8} {:>14} {:>11} {:>9}",
            d.slug, d.name, d.mic_rate, d.injection_snr_db, d.leaked_snr_db, d.accuracy_ref
        );
    }
    Ok(())
}

fn is_file(p: Option<&Path>) -> bool {
    p.is_some_and(Path::is_file)
}

fn inject(common: &Common, a: &InjectArgs) -> Outcome {
    let spec = experiment(
        common,
        &[ExperimentKind::InjectionEval],
        source_overrides(&a.source),
        |s| {
            if a.k.is_some() {
                s.injection_k = a.k;
            }
            if let Some(t) = a.threshold {
                s.success_threshold = t;
            }
        },
    )?;
    if !is_file(a.source.input.as_deref()) {
        return finish(compute_report(&spec)?, &spec.output);
    }
    let audio = load_wav(&spec.corpus)?;
    fs::create_dir_all(&spec.output).map_err(io(&spec.output))?;
    for d in registry_devices(&spec)? {
        match injection_trial(&audio, &d, spec.injection_k) {
            Ok(t) => save(&t.recorded, &spec.output.join(format!("injected_{}.wav", d.slug)))?,
            Err(e) if e.is_validation() => eprintln!("{}: {e}", d.slug),
            Err(e) => return Err(e),
        }
    }
    finish(injection_eval(&spec, &[audio])?, &spec.output)
}

fn eavesdrop(common: &Common, a: &SourceArgs) -> Outcome {
    let spec = experiment(common, &[ExperimentKind::EavesdropEval], source_overrides(a), |_| {})?;
    if !is_file(a.input.as_deref()) {
        return finish(compute_report(&spec)?, &spec.output);
    }
    let audio = load_wav(&spec.corpus)?;
    fs::create_dir_all(&spec.output).map_err(io(&spec.output))?;
    let t = eavesdrop_trial(&audio, &EavesdropConfig::default())?;
    save(&t.recovered, &spec.output.join("eavesdropped.wav"))?;
    finish(eavesdrop_eval(&spec, &[audio])?, &spec.output)
}

fn powerline(common: &Common, a: &PowerlineArgs) -> Outcome {
    let o = Overrides {
        model: a.model.as_deref(),
        no_noise: a.no_noise,
        ..source_overrides(&a.source)
    };
    if !is_file(a.source.input.as_deref()) {
        let spec = experiment(common, &[ExperimentKind::PowerlineEval], o, |_| {})?;
        return finish(compute_report(&spec)?, &spec.output);
    }
    // one utterance: keep the trace and the recovered audio; the model is optional
    let mut spec = base_spec(common, &[ExperimentKind::PowerlineEval], o.corpus)?;
    apply(&mut spec, common, &o);
    spec.validate_fields()?;
    let devices = registry_devices(&spec)?;
    let volume = single_volume(common)?;
    let model = a.model.as_deref().map(load_checkpoint).transpose()?;
    let audio = load_wav(&spec.corpus)?;
    fs::create_dir_all(&spec.output).map_err(io(&spec.output))?;
    let mut report = Report::new("powerline_trace", spec.seed, spec.config_hash());
    for d in devices {
        let cfg = powerline_config(&d, spec.firmware_noise);
        let t = powerline_trial(&audio, &cfg, volume, cell_seed(spec.seed, 0), &spec.denoise)?;
        let trace_path = spec.output.join(format!("current_{}.csv", d.slug));
        t.trace.write_csv(&trace_path)?;
        println!("wrote {}", trace_path.display());
        save(&t.recovered, &spec.output.join(format!("recovered_{}.wav", d.slug)))?;
        let cond = format!("volume={volume}");
        if let Some(snr) = t.snr_db {
            report.push(&d.slug, &cond, "leaked_snr_db", snr);
        }
        if let Some(m) = &model {
            let p = predict(m, &t.feature)?;
            println!("{}: {} ({:.3})", d.slug, LABELS[p.digit], p.probabilities[p.digit]);
            report.push(&d.slug, &cond, "predicted_digit", p.digit as f64);
        }
    }
    finish(report, &spec.output)
}

fn denoise(common: &Common, a: &DenoiseArgs) -> Outcome {
    if !(a.idle > 0.0 && a.idle.is_finite()) {
        return Err(invalid(format!("--idle {} must be positive", a.idle)));
    }
    let trace = if a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        CurrentTrace::read_csv(&a.input)?
    } else {
        CurrentTrace::read_raw(&a.input)?
    };
    let mut cfg = DenoiseConfig::default();
    if let Some(f) = a.floor {
        cfg.floor = f;
    }
    if let Some(h) = a.hp_cutoff {
        cfg.hp_cutoff = h;
    }
    let primitive = recover_primitive(&trace, cfg.hp_cutoff)?;
    let idle = primitive.slice(0, ((a.idle * trace.rate()).round() as usize).min(primitive.len()));
    let profile = estimate_noise(&idle, cfg.geometry)?;
    let clean = spectral_subtract(&primitive, &profile, cfg.floor)?;
    let dir = out_dir(common);
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    save(&clean, &dir.join("denoised.wav"))?;
    let np = dir.join("noise_profile.csv");
    profile.write_csv(&np)?;
    println!("wrote {}", np.display());
    Ok(())
}

fn train(common: &Common, a: &TrainArgs) -> Outcome {
    let mut spec = match &common.config {
        Some(p) => TrainSpec::load(p)?,
        None => TrainSpec::new(a.corpus.clone().ok_or_else(|| invalid("give --config or --corpus"))?),
    };
    if let Some(c) = &a.corpus {
        spec.corpus = c.clone();
    }
    if let Some(d) = &common.out {
        spec.output = d.clone();
    }
    if let Some(s) = common.seed {
        spec.train.seed = s;
    }
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    if let Some(b) = a.batch_size {
        spec.train.batch_size = b;
    }
    if let Some(l) = a.learning_rate {
        spec.train.learning_rate = l;
    }
    if a.limit.is_some() {
        spec.limit = a.limit;
    }
    if a.channel || !common.profiles.is_empty() {
        spec.channel_devices = if common.profiles.is_empty() {
            vec!["all".into()]
        } else {
            common.profiles.clone()
        };
    }
    if !common.volumes.is_empty() {
        spec.channel_volume = single_volume(common)?;
    }
    if a.no_noise {
        spec.firmware_noise = false;
    }
    let out = run_training(&spec)?;
    for e in &out.report.epochs {
        let val = e
            .validation_accuracy
            .map(|v| format!(" validation {v:.3}"))
            .unwrap_or_default();
        println!(
            "epoch {:>3} loss {:.4} train {:.3}{val}",
            e.epoch, e.loss, e.train_accuracy
        );
    }
    println!("wrote {} (sha256 {})", out.checkpoint.display(), out.sha256);
    println!("wrote {}", out.log.display());
    Ok(())
}

fn classify(common: &Common, a: &ClassifyArgs) -> Outcome {
    let model = load_checkpoint(&a.model)?;
    let mut csv = String::from("file,digit,probability\n");
    print!("{csv}");
    for path in &a.inputs {
        let p = predict(&model, &featurize(&load_wav(path)?)?)?;
        let line = format!("{},{},{}", path.display(), p.digit, p.probabilities[p.digit]);
        println!("{line}");
        csv.push_str(&line);
        csv.push('\n');
    }
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join("predictions.csv");
        fs::write(&path, csv).map_err(io(&path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn clean_eval(common: &Common, model: &CnnModel, model_sha: &str, corpus_dir: &Path, limit: Option<usize>) -> Outcome {
    let mut corpus = load_corpus(corpus_dir)?;
    if let Some(l) = limit {
        corpus.truncate(l);
    }
    if corpus.is_empty() {
        return Err(invalid(format!("no .wav files in {}", corpus_dir.display())));
    }
    let data = examples(&corpus, &FeatureSource::Clean)?;
    let ev = evaluate(model, &data)?;
    let seed = common.seed.unwrap_or(0);
    let hash = digest(&[&[seed as f64, data.len() as f64]]);
    let mut report = Report::new("clean_eval", seed, hash);
    report.note(format!("model_sha256: {model_sha}"));
    report.note(format!("corpus: {}", corpus_dir.display()));
    report.push("none", "clean", "accuracy", ev.accuracy);
    report.attach("confusion_clean.csv", ev.confusion.to_csv());
    finish(report, &out_dir(common))
}

fn eval(common: &Common, a: &EvalArgs) -> Outcome {
    let o = Overrides {
        corpus: a.corpus.as_deref(),
        model: a.model.as_deref(),
        limit: a.limit,
        registry: a.registry.as_deref(),
        no_noise: a.no_noise,
    };
    if common.config.is_some() || !common.profiles.is_empty() {
        let spec = experiment(common, &[ExperimentKind::PowerlineEval], o, |_| {})?;
        return finish(compute_report(&spec)?, &spec.output);
    }
    let corpus = a.corpus.as_deref().ok_or_else(|| invalid("eval needs --corpus"))?;
    let model_path = a.model.as_deref().ok_or_else(|| invalid("eval needs --model"))?;
    let mut probe = ExperimentSpec::new(ExperimentKind::PowerlineEval, corpus);
    probe.model = Some(model_path.to_path_buf());
    let (model, sha) = load_model(&probe)?;
    clean_eval(common, &model, &sha, corpus, a.limit)
}

fn sweep(common: &Common, a: &SweepArgs) -> Outcome {
    let allowed = match (a.kind, &common.config) {
        (Some(SweepKind::Volume), _) => vec![ExperimentKind::VolumeSweep],
        (Some(SweepKind::Noise), _) => vec![ExperimentKind::NoiseSweep],
        (None, Some(_)) => vec![ExperimentKind::VolumeSweep, ExperimentKind::NoiseSweep],
        (None, None) => return Err(invalid("give --config or --kind")),
    };
    let o = Overrides {
        corpus: a.corpus.as_deref(),
        model: a.model.as_deref(),
        limit: a.limit,
        registry: a.registry.as_deref(),
        no_noise: a.no_noise,
    };
    let spec = experiment(common, &allowed, o, |s| {
        if !a.levels.is_empty() {
            s.acoustic_noise_levels = a.levels.clone();
        }
    })?;
    finish(compute_report(&spec)?, &spec.output)
}
