//! WAV container I/O. PCM integer and IEEE float input, 16-bit or float output.

use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

use super::AudioBuffer;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("no such file: {0}")]
    Missing(PathBuf),
    #[error("malformed WAV header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },
    #[error("unsupported WAV encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("cannot write {path}: {source}")]
    Unwritable { path: PathBuf, source: io::Error },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Output sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Float32,
}

/// Outcome of a write: how many samples were clipped into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub clipped: usize,
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => WavError::Missing(path.to_path_buf()),
        _ => WavError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || spec.sample_rate == 0 {
        return Err(WavError::MalformedHeader {
            path: path.to_path_buf(),
            detail: "zero channels or zero sample rate".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| classify(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| classify(path, e))?
        }
        (format, bits) => {
            return Err(WavError::UnsupportedEncoding {
                path: path.to_path_buf(),
                detail: format!("{format:?} with {bits} bits per sample"),
            })
        }
    };

    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioBuffer::new(samples, spec.sample_rate as f64).map_err(|e| WavError::MalformedHeader {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Writes a mono WAV. Samples outside `[-1, 1]` are clipped and counted.
pub fn save_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, depth: BitDepth) -> Result<WriteReport, WavError> {
    let path = path.as_ref();
    let unwritable = |source: io::Error| WavError::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: buffer.rate().round() as u32,
        bits_per_sample: match depth {
            BitDepth::Pcm16 => 16,
            BitDepth::Float32 => 32,
        },
        sample_format: match depth {
            BitDepth::Pcm16 => SampleFormat::Int,
            BitDepth::Float32 => SampleFormat::Float,
        },
    };
    let file = File::create(path).map_err(unwritable)?;
    let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(|e| hound_to_io(e, path))?;

    let mut report = WriteReport::default();
    for &s in buffer.samples() {
        let c = s.clamp(-1.0, 1.0);
        if c != s {
            report.clipped += 1;
        }
        let written = match depth {
            BitDepth::Pcm16 => {
                let q = (c * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q)
            }
            BitDepth::Float32 => writer.write_sample(c as f32),
        };
        written.map_err(|e| hound_to_io(e, path))?;
    }
    writer.finalize().map_err(|e| hound_to_io(e, path))?;
    Ok(report)
}

fn hound_to_io(e: hound::Error, path: &Path) -> WavError {
    match e {
        hound::Error::IoError(source) => WavError::Unwritable {
            path: path.to_path_buf(),
            source,
        },
        other => WavError::Unwritable {
            path: path.to_path_buf(),
            source: io::Error::other(other.to_string()),
        },
    }
}

fn classify(path: &Path, e: hound::Error) -> WavError {
    let path = path.to_path_buf();
    match e {
        hound::Error::Unsupported => WavError::UnsupportedEncoding {
            path,
            detail: "format tag not supported".into(),
        },
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => WavError::UnsupportedEncoding {
            path,
            detail: e.to_string(),
        },
        // a well-formed header describing a sample width the reader cannot decode
        hound::Error::FormatError(detail) if detail.contains("bits per sample") => WavError::UnsupportedEncoding {
            path,
            detail: detail.into(),
        },
        hound::Error::FormatError(detail) => WavError::MalformedHeader {
            path,
            detail: detail.into(),
        },
        hound::Error::UnfinishedSample => WavError::MalformedHeader {
            path,
            detail: "payload ends inside a sample".into(),
        },
        // hound reports short reads as `Other`
        hound::Error::IoError(source)
            if matches!(source.kind(), io::ErrorKind::UnexpectedEof | io::ErrorKind::Other) =>
        {
            WavError::MalformedHeader {
                path,
                detail: "file ends before the header is complete".into(),
            }
        }
        hound::Error::IoError(source) => WavError::Io { path, source },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn one_second_pcm16_mono() {
        let dir = tmp();
        let p = dir.path().join("a.wav");
        let b = AudioBuffer::from_fn(8000, 8000.0, |t| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()).unwrap();
        save_wav(&b, &p, BitDepth::Pcm16).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.len(), 8000);
        assert_eq!(back.rate(), 8000.0);
    }

    #[test]
    fn zero_payload_loads_as_silence() {
        let dir = tmp();
        let p = dir.path().join("z.wav");
        save_wav(&AudioBuffer::silence(100, 16000.0).unwrap(), &p, BitDepth::Pcm16).unwrap();
        assert!(load_wav(&p).unwrap().samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let dir = tmp();
        let p = dir.path().join("f.wav");
        let samples: Vec<f64> = (0..512).map(|i| ((i as f32 * 0.37).sin() * 0.9) as f64).collect();
        let b = AudioBuffer::new(samples, 44100.0).unwrap();
        save_wav(&b, &p, BitDepth::Float32).unwrap();
        let back = load_wav(&p).unwrap();
        let max = b
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert_eq!(max, 0.0);
    }

    #[test]
    fn pcm16_round_trip_within_quantization_step() {
        let dir = tmp();
        let p = dir.path().join("q.wav");
        let samples: Vec<f64> = (0..4000)
            .map(|i| (i as f64 * 0.011).sin() * 0.999)
            .chain([1.0, -1.0])
            .collect();
        let b = AudioBuffer::new(samples, 8000.0).unwrap();
        save_wav(&b, &p, BitDepth::Pcm16).unwrap();
        let back = load_wav(&p).unwrap();
        let max = b
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 2f64.powi(-15), "max diff {max}");
    }

    #[test]
    fn out_of_range_samples_are_clipped_and_counted() {
        let dir = tmp();
        let p = dir.path().join("c.wav");
        let b = AudioBuffer::new(vec![0.1, 1.5, -0.2, -3.0], 8000.0).unwrap();
        let report = save_wav(&b, &p, BitDepth::Pcm16).unwrap();
        assert_eq!(report.clipped, 2);
        let back = load_wav(&p).unwrap();
        assert!((back.samples()[1] - 32767.0 / 32768.0).abs() < 1e-12);
        assert_eq!(back.samples()[3], -1.0);
    }

    #[test]
    fn stereo_is_downmixed() {
        let dir = tmp();
        let p = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for _ in 0..10 {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let b = load_wav(&p).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.samples().iter().all(|&s| (s - 0.25).abs() < 1e-12));
    }

    #[test]
    fn error_paths_are_distinct() {
        let dir = tmp();
        assert!(matches!(
            load_wav(dir.path().join("nope.wav")),
            Err(WavError::Missing(_))
        ));

        let good = dir.path().join("g.wav");
        save_wav(&AudioBuffer::silence(100, 8000.0).unwrap(), &good, BitDepth::Pcm16).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let trunc = dir.path().join("t.wav");
        File::create(&trunc).unwrap().write_all(&bytes[..20]).unwrap();
        assert!(
            matches!(load_wav(&trunc), Err(WavError::MalformedHeader { .. })),
            "{:?}",
            load_wav(&trunc)
        );

        let junk = dir.path().join("j.wav");
        File::create(&junk)
            .unwrap()
            .write_all(b"not a riff file at all, no sir")
            .unwrap();
        assert!(matches!(load_wav(&junk), Err(WavError::MalformedHeader { .. })));

        // IEEE float, 64-bit: format tag 3 with 64 bits per sample.
        let f64wav = dir.path().join("d.wav");
        let mut h = Vec::new();
        h.extend_from_slice(b"RIFF");
        h.extend_from_slice(&(36u32 + 16).to_le_bytes());
        h.extend_from_slice(b"WAVEfmt ");
        h.extend_from_slice(&16u32.to_le_bytes());
        h.extend_from_slice(&3u16.to_le_bytes());
        h.extend_from_slice(&1u16.to_le_bytes());
        h.extend_from_slice(&8000u32.to_le_bytes());
        h.extend_from_slice(&64000u32.to_le_bytes());
        h.extend_from_slice(&8u16.to_le_bytes());
        h.extend_from_slice(&64u16.to_le_bytes());
        h.extend_from_slice(b"data");
        h.extend_from_slice(&16u32.to_le_bytes());
        h.extend_from_slice(&[0u8; 16]);
        File::create(&f64wav).unwrap().write_all(&h).unwrap();
        assert!(
            matches!(load_wav(&f64wav), Err(WavError::UnsupportedEncoding { .. })),
            "{:?}",
            load_wav(&f64wav)
        );
    }

    #[test]
    fn unwritable_path_is_reported() {
        let b = AudioBuffer::silence(4, 8000.0).unwrap();
        let err = save_wav(&b, "/nonexistent-dir/x/y.wav", BitDepth::Pcm16).unwrap_err();
        assert!(matches!(err, WavError::Unwritable { .. }));
    }
}
