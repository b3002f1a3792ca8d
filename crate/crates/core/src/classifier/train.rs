//! Single-threaded, seed-deterministic mini-batch training.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::Feature130;
use super::network::{Arch, CnnModel, Dropout, Network};
use super::ClassifierError;
use crate::channel::noise::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Optimizer {
    SgdMomentum { momentum: f64 },
    AdaptiveMoment { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::AdaptiveMoment {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn sgd() -> Self {
        Self::SgdMomentum { momentum: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Fraction of each class held out for validation.
    pub validation_fraction: f64,
    #[serde(default)]
    pub arch: Arch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            validation_fraction: 0.1,
            arch: Arch::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidConfig(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction {} must lie in (0, 1)",
                self.validation_fraction
            ));
        }
        self.arch.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Example {
    pub feature: Feature130,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy of the dropout-perturbed forward passes seen while training.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_size: usize,
    pub validation_size: usize,
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn first_loss(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.loss)
    }
}

const SPLIT_STREAM: u64 = 10;
const SHUFFLE_STREAM: u64 = 11;
const DROPOUT_STREAM: u64 = 12;

/// Stratified split: `floor(n * fraction)` examples of each class go to validation.
pub fn split_indices(labels: &[usize], classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, SPLIT_STREAM);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * fraction).floor() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn train(data: &[Example], cfg: &TrainConfig) -> Result<(CnnModel, TrainReport), ClassifierError> {
    train_with(data, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    data: &[Example],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(CnnModel, TrainReport), ClassifierError> {
    cfg.validate()?;
    let classes = cfg.arch.classes;
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if let Some(e) = data.iter().find(|e| e.label >= classes) {
        return Err(ClassifierError::InvalidLabel(e.label));
    }
    for c in 0..classes {
        if !data.iter().any(|e| e.label == c) {
            return Err(ClassifierError::EmptyClass { digit: c });
        }
    }

    let labels: Vec<usize> = data.iter().map(|e| e.label).collect();
    let (train_idx, val_idx) = split_indices(&labels, classes, cfg.validation_fraction, cfg.seed);

    let mut net = Network::<f32>::new(cfg.arch, cfg.seed)?;
    let mut state = OptimizerState::new(&net, cfg.optimizer);
    let mut shuffle_rng = stream(cfg.seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(cfg.seed, DROPOUT_STREAM);
    let mut order = train_idx.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&[f32]> = batch.iter().map(|&i| data[i].feature.as_slice()).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| data[i].label).collect();
            let r = net.loss_and_gradients(&inputs, &targets, Some(Dropout { rng: &mut dropout_rng }))?;
            let grads_finite = r.grads.iter().flatten().all(|g| g.is_finite());
            if !r.loss.is_finite() || !grads_finite {
                return Err(ClassifierError::Divergence {
                    epoch,
                    batch: batch_no,
                    loss: r.loss,
                });
            }
            state.step(&mut net, &r.grads, cfg.learning_rate);
            loss_sum += r.loss * batch.len() as f64;
            correct += r.correct;
        }
        let validation_accuracy = if val_idx.is_empty() {
            None
        } else {
            let subset: Vec<&Example> = val_idx.iter().map(|&i| &data[i]).collect();
            Some(super::eval::accuracy_of(&net, &subset)?)
        };
        let stats = EpochStats {
            epoch,
            loss: loss_sum / order.len() as f64,
            train_accuracy: correct as f64 / order.len() as f64,
            validation_accuracy,
        };
        on_epoch(&stats);
        epochs.push(stats);
    }

    Ok((
        net,
        TrainReport {
            train_size: train_idx.len(),
            validation_size: val_idx.len(),
            epochs,
        },
    ))
}

enum OptimizerState {
    Sgd {
        momentum: f32,
        velocity: Vec<Vec<f32>>,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: i32,
        m: Vec<Vec<f32>>,
        v: Vec<Vec<f32>>,
    },
}

impl OptimizerState {
    fn new(net: &CnnModel, opt: Optimizer) -> Self {
        match opt {
            Optimizer::SgdMomentum { momentum } => Self::Sgd {
                momentum: momentum as f32,
                velocity: net.zeros_like(),
            },
            Optimizer::AdaptiveMoment { beta1, beta2, epsilon } => Self::Adam {
                beta1,
                beta2,
                epsilon,
                t: 0,
                m: net.zeros_like(),
                v: net.zeros_like(),
            },
        }
    }

    fn step(&mut self, net: &mut CnnModel, grads: &[Vec<f32>], lr: f64) {
        match self {
            Self::Sgd { momentum, velocity } => {
                let lr = lr as f32;
                for ((w, g), vel) in net.params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
                    for ((w, &g), v) in w.iter_mut().zip(g).zip(vel.iter_mut()) {
                        *v = *momentum * *v - lr * g;
                        *w += *v;
                    }
                }
            }
            Self::Adam {
                beta1,
                beta2,
                epsilon,
                t,
                m,
                v,
            } => {
                *t += 1;
                let (b1, b2) = (*beta1 as f32, *beta2 as f32);
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                let step = (lr * c2.sqrt() / c1) as f32;
                let eps = (*epsilon * c2.sqrt()) as f32;
                for (((w, g), m), v) in net.params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *w -= step * *m / (v.sqrt() + eps);
                    }
                }
            }
        }
    }
}
