use powerleak::classifier::synth::{generate, CorpusSpec};
use powerleak::classifier::{
    evaluate, featurize, load_checkpoint, predict, save_checkpoint, train, Example, Feature130, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_per_digit() -> Vec<Example> {
    let spec = CorpusSpec {
        voices: 1,
        takes: 1,
        rate: 8000.0,
        seed: 21,
    };
    generate(&spec)
        .unwrap()
        .into_iter()
        .map(|u| Example {
            feature: featurize(&u.audio).unwrap(),
            label: u.digit,
        })
        .collect()
}

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 10,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn ten_samples_are_memorized() {
    let data = one_per_digit();
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        ..quick(200, 1)
    };
    let (model, report) = train(&data, &cfg).unwrap();
    assert_eq!(report.validation_size, 0);
    let ev = evaluate(&model, &data).unwrap();
    assert_eq!(ev.accuracy, 1.0);
    for e in &data {
        let p = predict(&model, &e.feature).unwrap();
        assert_eq!(p.digit, e.label);
        assert!(
            p.probabilities[e.label] > 0.99,
            "{}: {}",
            e.label,
            p.probabilities[e.label]
        );
    }
    assert!(report.final_loss() <= 0.5 * report.first_loss());
}

#[test]
fn same_seed_gives_identical_weights() {
    let data = one_per_digit();
    let (a, ra) = train(&data, &quick(3, 7)).unwrap();
    let (b, rb) = train(&data, &quick(3, 7)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(ra, rb);
    let (c, _) = train(&data, &quick(3, 8)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn checkpoint_file_preserves_predictions() {
    let data = one_per_digit();
    let (model, _) = train(&data, &quick(2, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_checkpoint(&model, &path, serde_json::json!({})).unwrap();
    let back = load_checkpoint(&path).unwrap();
    for e in &data {
        assert_eq!(
            predict(&model, &e.feature).unwrap(),
            predict(&back, &e.feature).unwrap()
        );
    }
}

fn random_feature(seed: u64) -> Feature130 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Feature130::from_vec((0..130 * 130).map(|_| rng.random_range(0.0f32..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn softmax_sums_to_one(seed in 0u64..10_000, init in 0u64..100) {
        let model = powerleak::classifier::CnnModel::new(Default::default(), init).unwrap();
        let f = random_feature(seed);
        let p = predict(&model, &f).unwrap();
        prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert_eq!(&p, &predict(&model, &f).unwrap());
    }

    #[test]
    fn features_ignore_playback_level(gain in 0.01f64..8.0, digit in 0usize..10) {
        let spec = CorpusSpec { voices: 1, takes: 1, rate: 8000.0, seed: 2 };
        let u = generate(&spec).unwrap().into_iter().find(|u| u.digit == digit).unwrap();
        let a = featurize(&u.audio).unwrap();
        let b = featurize(&u.audio.scaled(gain).unwrap()).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-4);
        }
    }
}
