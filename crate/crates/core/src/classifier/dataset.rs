//! Spoken-digit corpora stored as `<digit>_<speaker>_<index>.wav`.

use std::path::{Path, PathBuf};

use super::ClassifierError;
use crate::signal::{load_wav, AudioBuffer};

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub path: PathBuf,
    pub digit: usize,
    pub speaker: String,
    pub index: u32,
    pub audio: AudioBuffer,
}

/// Splits `7_jackson_32.wav` into `(7, "jackson", 32)`.
pub fn parse_name(name: &str) -> Option<(usize, String, u32)> {
    let stem = name.strip_suffix(".wav")?;
    let (digit, rest) = stem.split_once('_')?;
    let (speaker, index) = rest.rsplit_once('_')?;
    let digit: usize = digit.parse().ok().filter(|d| *d < 10)?;
    if speaker.is_empty() {
        return None;
    }
    Some((digit, speaker.to_string(), index.parse().ok()?))
}

/// WAV paths in `dir`, sorted by file name. Other files are ignored.
pub fn list_corpus(dir: &Path) -> Result<Vec<PathBuf>, ClassifierError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ClassifierError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for e in entries {
        let e = e.map_err(|source| ClassifierError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let p = e.path();
        if p.extension().is_some_and(|x| x == "wav") {
            paths.push(p);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

pub fn load_corpus(dir: &Path) -> Result<Vec<Utterance>, ClassifierError> {
    let mut out = Vec::new();
    for path in list_corpus(dir)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let (digit, speaker, index) = parse_name(name).ok_or_else(|| ClassifierError::DatasetName(path.clone()))?;
        let audio = load_wav(&path)?;
        out.push(Utterance {
            path,
            digit,
            speaker,
            index,
            audio,
        });
    }
    if out.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    Ok(out)
}
