//! `powerleak`: simulate the charging-cable audio channels, train and run the
//! digit recognizer, and write experiment reports as CSV.
//!
//! Exit status is 0 on success, 1 when the arguments or config are invalid
//! and 2 when a run fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "powerleak", version, about = "Power-line audio side-channel toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Device slug or display name. Repeatable.
    #[arg(long = "profile", global = true)]
    pub profiles: Vec<String>,
    /// Playback volume in (0, 1]. Repeatable for sweeps.
    #[arg(long = "volume", global = true)]
    pub volumes: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic spoken-digit corpus as 8 kHz WAVs.
    Corpus(CorpusArgs),
    /// Inspect the device registry.
    Profiles {
        #[command(subcommand)]
        action: ProfilesAction,
    },
    /// Inject audio through the microphone wire and score the recordings.
    Inject(InjectArgs),
    /// Recover played audio from the speaker-wire voltage.
    Eavesdrop(SourceArgs),
    /// Capture the charging current while audio plays.
    Powerline(PowerlineArgs),
    /// Denoise a captured current trace by spectral subtraction.
    Denoise(DenoiseArgs),
    /// Train the digit recognizer.
    Train(TrainArgs),
    /// Predict the digit spoken in WAV files.
    Classify(ClassifyArgs),
    /// Score a model on clean audio, or through the power line with --profile.
    Eval(EvalArgs),
    /// Volume or ambient-noise sweep.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum ProfilesAction {
    List {
        /// Registry TOML to list instead of the built-in one.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 6)]
    pub voices: usize,
    #[arg(long, default_value_t = 50)]
    pub takes: u32,
    #[arg(long, default_value_t = 8000.0)]
    pub rate: f64,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// A WAV file, or a directory of WAVs.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use only the first N files.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Voltage factor applied to every device.
    #[arg(long)]
    pub k: Option<f64>,
    /// Correlation needed for a successful injection.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PowerlineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Leave firmware noise out of the current.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Trace as `time_s,value` CSV, or raw f64 with a JSON sidecar.
    #[arg(long)]
    pub input: PathBuf,
    /// Seconds of idle current at the start used as the noise estimate.
    #[arg(long, default_value_t = 0.5)]
    pub idle: f64,
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub hp_cutoff: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of `<digit>_<speaker>_<index>.wav` files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Train on audio played through the power line of the --profile
    /// devices, or of every device when none is given.
    #[arg(long)]
    pub channel: bool,
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Volume,
    Noise,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SweepKind>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Ambient level in dB for the noise sweep. Repeatable.
    #[arg(long = "level")]
    pub levels: Vec<f64>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub no_noise: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
