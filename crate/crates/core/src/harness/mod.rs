//! Experiment orchestration: device-by-condition evaluations of the three
//! channels and CSV reports with provenance headers.

pub mod experiments;
pub mod report;
pub mod spec;
pub mod training;
pub mod trials;

use std::path::PathBuf;

use thiserror::Error;

use crate::channel::noise::derive_seed;
use crate::channel::ChannelError;
use crate::classifier::ClassifierError;
use crate::denoise::DenoiseError;
use crate::signal::{SignalError, WavError};

pub use experiments::{
    compute_report, eavesdrop_eval, injection_eval, noise_sweep, powerline_eval, run_experiment, volume_sweep,
};
pub use report::{emit_report, Report, Row};
pub use spec::{ExperimentKind, ExperimentSpec};
pub use training::{run_training, TrainOutcome, TrainSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("config {}: {detail}", path.display())]
    Config { path: PathBuf, detail: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// True when the inputs were wrong rather than the run failing.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Invalid(_) | HarnessError::Config { .. } => true,
            HarnessError::Channel(e) => matches!(
                e,
                ChannelError::InvalidParameter(_)
                    | ChannelError::InvalidVolume(_)
                    | ChannelError::UnknownProfile(_)
                    | ChannelError::Registry(_)
                    | ChannelError::BurstOutsideTrace { .. }
                    | ChannelError::NegativeVoltage { .. }
            ),
            HarnessError::Classifier(e) => matches!(
                e,
                ClassifierError::InvalidConfig(_)
                    | ClassifierError::InvalidArch(_)
                    | ClassifierError::EmptyDataset
                    | ClassifierError::EmptyClass { .. }
                    | ClassifierError::DatasetName(_)
                    | ClassifierError::ShapeMismatch { .. }
            ),
            HarnessError::Denoise(e) => matches!(e, DenoiseError::InvalidFloor(_) | DenoiseError::TooShort { .. }),
            _ => false,
        }
    }
}

/// Seed of one (device, condition, trial) cell. Depends only on the master
/// seed and the cell index, so cells can run in any order.
pub fn cell_seed(master: u64, cell: u64) -> u64 {
    derive_seed(&[master, cell])
}
