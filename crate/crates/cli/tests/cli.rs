use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn powerleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powerleak"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = powerleak(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    powerleak(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_corpus(root: &Path) -> PathBuf {
    let dir = root.join("corpus");
    ok(&[
        "corpus",
        "--voices",
        "2",
        "--takes",
        "1",
        "--seed",
        "4",
        "--out",
        s(&dir),
    ]);
    dir
}

fn same_files(a: &Path, b: &Path) -> Vec<(String, Vec<u8>)> {
    let (fa, fb) = (files(a), files(b));
    let names = |f: &[(String, Vec<u8>)]| f.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&fa), names(&fb));
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{name} differs between runs");
    }
    fa
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn profiles_list_shows_every_device() {
    let out = ok(&["profiles", "list"]);
    assert_eq!(out.lines().count(), 10);
    assert!(out.contains("pixel-4xl"));
    assert!(out.contains("32000"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&["teleport"]), 1);
    assert_eq!(code(&["inject", "--bogus"]), 1);
    assert_eq!(code(&["inject"]), 1);
    assert_eq!(code(&["inject", "--input", "x", "--volume", "1.5"]), 1);
    assert_eq!(code(&["inject", "--input", "x", "--profile", "nokia"]), 1);
    assert_eq!(code(&["eval", "--corpus", "x"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing-here");
    assert_eq!(code(&["eval", "--corpus", s(&missing), "--model", s(&missing)]), 2);
    let bad = tmp.path().join("bad.wav");
    fs::write(&bad, b"RIFF....").unwrap();
    assert_eq!(code(&["eavesdrop", "--input", s(&bad), "--out", s(tmp.path())]), 2);
}

#[test]
fn wrong_config_kind_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("p.toml");
    fs::write(
        &cfg,
        "kind = \"noise_sweep\"\ncorpus = \"c\"\nacoustic_noise_levels = [40.0]\n",
    )
    .unwrap();
    assert_eq!(code(&["inject", "--config", s(&cfg)]), 1);
    fs::write(&cfg, "kind = \"noise_sweep\"\ncorpus = \"c\"\nunknown = 1\n").unwrap();
    assert_eq!(code(&["sweep", "--config", s(&cfg)]), 1);
}

#[test]
fn injection_reports_repeat_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = small_corpus(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "inject",
            "--input",
            s(&corpus),
            "--profile",
            "note-10",
            "--profile",
            "pixel-4xl",
            "--limit",
            "4",
            "--seed",
            "2",
            "--out",
            s(d),
        ]);
    }
    let fa = same_files(&a, &b);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"injection_eval_success_rate.csv"), "{names:?}");
    let snr = String::from_utf8(
        fa.iter()
            .find(|(n, _)| n == "injection_eval_snr_db.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert!(snr.contains("# seed: 2"));
    assert!(snr.contains("pixel-4xl,injection,snr_db,"));
}

#[test]
fn single_file_commands_write_audio() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = small_corpus(tmp.path());
    let wav = corpus.join("3_alder_0.wav");
    let out = tmp.path().join("one");
    ok(&["inject", "--input", s(&wav), "--profile", "honor-10", "--out", s(&out)]);
    assert!(out.join("injected_honor-10.wav").is_file());
    ok(&["eavesdrop", "--input", s(&wav), "--out", s(&out)]);
    assert!(out.join("eavesdropped.wav").is_file());
    ok(&[
        "powerline",
        "--input",
        s(&wav),
        "--profile",
        "honor-10",
        "--volume",
        "0.5",
        "--out",
        s(&out),
    ]);
    let trace = out.join("current_honor-10.csv");
    assert!(trace.is_file());
    assert!(out.join("recovered_honor-10.wav").is_file());
    let den = tmp.path().join("den");
    ok(&["denoise", "--input", s(&trace), "--out", s(&den)]);
    assert!(den.join("denoised.wav").is_file());
    assert!(den.join("noise_profile.csv").is_file());
}

#[test]
fn training_is_deterministic_and_feeds_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = small_corpus(tmp.path());
    let cfg = tmp.path().join("train.toml");
    fs::write(
        &cfg,
        format!(
            "corpus = \"{}\"\n[train]\nepochs = 1\nbatch_size = 8\nvalidation_fraction = 0.5\n",
            s(&corpus)
        ),
    )
    .unwrap();
    let (a, b) = (tmp.path().join("ta"), tmp.path().join("tb"));
    for d in [&a, &b] {
        ok(&["train", "--config", s(&cfg), "--seed", "9", "--out", s(d)]);
    }
    let fa = same_files(&a, &b);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["model.bin", "model.bin.json", "train_log.csv"]);

    let model = a.join("model.bin");
    let ev = tmp.path().join("ev");
    ok(&["eval", "--corpus", s(&corpus), "--model", s(&model), "--out", s(&ev)]);
    assert!(fs::read_to_string(ev.join("clean_eval_accuracy.csv"))
        .unwrap()
        .contains("none,clean,accuracy,"));
    let out = ok(&["classify", "--model", s(&model), s(&corpus.join("0_alder_0.wav"))]);
    assert!(out.starts_with("file,digit,probability\n"));
    assert_eq!(out.lines().count(), 2);

    let pl = tmp.path().join("pl");
    ok(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--profile",
        "honor-10",
        "--limit",
        "3",
        "--out",
        s(&pl),
    ]);
    let acc = fs::read_to_string(pl.join("powerline_eval_accuracy.csv")).unwrap();
    assert!(acc.contains("# model_sha256: "));
    assert!(acc.contains("honor-10,volume=1,accuracy,"));
}

#[test]
fn noise_sweep_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = small_corpus(tmp.path());
    let out = tmp.path().join("sw");
    ok(&[
        "sweep",
        "--kind",
        "noise",
        "--corpus",
        s(&corpus),
        "--profile",
        "iphone-x",
        "--level",
        "30",
        "--level",
        "70",
        "--limit",
        "2",
        "--out",
        s(&out),
    ]);
    let air = fs::read_to_string(out.join("noise_sweep_air.csv")).unwrap();
    assert!(air.contains("ambient=70dB"));
    assert_eq!(code(&["sweep", "--kind", "noise", "--corpus", s(&corpus)]), 1);
}
