//! Spoken-digit recognition from 130 x 130 log spectrograms with a small CNN
//! trained from scratch.

pub mod checkpoint;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod network;
pub mod real;
pub mod synth;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::signal::{SignalError, WavError};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dataset::{load_corpus, Utterance};
pub use eval::{evaluate, predict, ConfusionMatrix, Evaluation, Prediction};
pub use features::{featurize, Feature130};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use network::{Arch, CnnModel, Network};
pub use train::{train, train_with, Example, Optimizer, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("audio is silent; no spectrogram to normalize")]
    DegenerateFeature,
    #[error("feature values must be finite and non-negative")]
    InvalidFeature,
    #[error("expected {expected} input values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("label {0} is outside the class range")]
    InvalidLabel(usize),
    #[error("no training examples for digit {digit}")]
    EmptyClass { digit: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },
    #[error("{} is not named <digit>_<speaker>_<index>.wav", .0.display())]
    DatasetName(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
