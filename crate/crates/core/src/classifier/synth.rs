//! Synthetic spoken digits from a cascade formant synthesizer.
//!
//! Each digit is a short phone sequence. Voiced phones drive a glottal pulse
//! train through five resonators whose frequencies glide between phone
//! targets; fricatives, bursts and aspiration are band-limited noise. Speech
//! is rendered at 48 kHz and resampled, so fricative energy above the target
//! Nyquist is removed the way a recorder would remove it.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::dataset::Utterance;
use super::ClassifierError;
use crate::channel::noise::derive_seed;
use crate::signal::filter::{Cascade, FilterKind};
use crate::signal::{resample, save_wav, AudioBuffer, BitDepth};

pub const SYNTH_RATE: f64 = 48000.0;
pub const DIGIT_NAMES: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

const NAMES: [&str; 24] = [
    "alder", "birch", "cedar", "dawn", "ember", "fern", "garnet", "heath", "iris", "juniper", "kestrel", "linden",
    "maple", "nettle", "opal", "pine", "quartz", "rowan", "sage", "tansy", "umber", "vale", "willow", "yarrow",
];

/// Speaker characteristics shared by every utterance of one voice.
#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    pub name: String,
    /// Mean fundamental frequency in Hz.
    pub f0: f64,
    /// Vocal-tract length factor applied to every formant.
    pub formant_scale: f64,
    /// Duration factor; above one is slower.
    pub tempo: f64,
    /// Aspiration noise mixed into the voiced source.
    pub breathiness: f64,
    /// Open fraction of each glottal period.
    pub open_quotient: f64,
}

/// `count` voices alternating between lower and higher registers.
pub fn voices(count: usize, seed: u64) -> Vec<Voice> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x766f_6963_6573]));
    (0..count)
        .map(|i| {
            let high = i % 2 == 1;
            let name = if i < NAMES.len() {
                NAMES[i].to_string()
            } else {
                format!("{}{}", NAMES[i % NAMES.len()], i / NAMES.len())
            };
            let (f0, scale) = if high {
                (rng.random_range(170.0..240.0), rng.random_range(1.10..1.22))
            } else {
                (rng.random_range(90.0..140.0), rng.random_range(0.92..1.05))
            };
            Voice {
                name,
                f0,
                formant_scale: scale,
                tempo: rng.random_range(0.85..1.2),
                breathiness: rng.random_range(0.02..0.12),
                open_quotient: rng.random_range(0.5..0.7),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Band {
    Sibilant,
    Labial,
    Dental,
    Alveolar,
    Velar,
    Aspiration,
}

impl Band {
    /// Pass band in Hz and level relative to the voiced RMS.
    fn shape(self) -> (f64, f64, f64) {
        match self {
            Band::Sibilant => (4200.0, 20000.0, 0.55),
            Band::Labial => (1200.0, 9000.0, 0.12),
            Band::Dental => (1500.0, 9000.0, 0.08),
            Band::Alveolar => (2800.0, 9000.0, 0.6),
            Band::Velar => (1400.0, 3400.0, 0.5),
            Band::Aspiration => (700.0, 6000.0, 0.15),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Phone {
    ms: f64,
    /// Formant targets at the start and end of the phone; `None` leaves the
    /// neighbours to set the trajectory.
    formants: Option<([f64; 3], [f64; 3])>,
    voicing: f64,
    noise: Option<Band>,
}

const fn steady(ms: f64, f: [f64; 3], voicing: f64) -> Phone {
    Phone {
        ms,
        formants: Some((f, f)),
        voicing,
        noise: None,
    }
}

const fn glide(ms: f64, from: [f64; 3], to: [f64; 3]) -> Phone {
    Phone {
        ms,
        formants: Some((from, to)),
        voicing: 1.0,
        noise: None,
    }
}

const fn noise(ms: f64, band: Band) -> Phone {
    Phone {
        ms,
        formants: None,
        voicing: 0.0,
        noise: Some(band),
    }
}

const fn closure(ms: f64, locus: [f64; 3]) -> Phone {
    Phone {
        ms,
        formants: Some((locus, locus)),
        voicing: 0.0,
        noise: None,
    }
}

const IY: [f64; 3] = [270.0, 2290.0, 3010.0];
const IH: [f64; 3] = [390.0, 1990.0, 2550.0];
const EH: [f64; 3] = [530.0, 1840.0, 2480.0];
const AH: [f64; 3] = [620.0, 1180.0, 2390.0];
const AO: [f64; 3] = [570.0, 840.0, 2410.0];
const UW: [f64; 3] = [300.0, 870.0, 2240.0];
const R: [f64; 3] = [420.0, 1300.0, 1600.0];
const W: [f64; 3] = [320.0, 700.0, 2200.0];
const N: [f64; 3] = [280.0, 1600.0, 2600.0];
const ALVEOLAR: [f64; 3] = [300.0, 1800.0, 2700.0];
const VELAR: [f64; 3] = [300.0, 2000.0, 2400.0];

fn z(ms: f64) -> Phone {
    Phone {
        noise: Some(Band::Sibilant),
        ..steady(ms, [300.0, 1700.0, 2600.0], 0.35)
    }
}

fn v(ms: f64) -> Phone {
    Phone {
        noise: Some(Band::Labial),
        ..steady(ms, [300.0, 1200.0, 2400.0], 0.4)
    }
}

fn t_release() -> [Phone; 3] {
    [
        closure(45.0, ALVEOLAR),
        noise(15.0, Band::Alveolar),
        noise(40.0, Band::Aspiration),
    ]
}

fn lexicon(digit: usize) -> Vec<Phone> {
    match digit {
        0 => vec![
            z(90.0),
            steady(70.0, IH, 1.0),
            steady(70.0, R, 0.7),
            glide(180.0, [480.0, 1000.0, 2400.0], [380.0, 850.0, 2300.0]),
        ],
        1 => vec![steady(80.0, W, 0.6), steady(150.0, AH, 1.0), steady(120.0, N, 0.35)],
        2 => {
            let mut v = t_release().to_vec();
            v.push(steady(230.0, UW, 1.0));
            v
        }
        3 => vec![noise(110.0, Band::Dental), steady(60.0, R, 0.7), steady(220.0, IY, 1.0)],
        4 => vec![
            noise(120.0, Band::Labial),
            steady(170.0, AO, 1.0),
            steady(110.0, R, 0.7),
        ],
        5 => vec![
            noise(110.0, Band::Labial),
            glide(210.0, [720.0, 1250.0, 2500.0], [380.0, 2100.0, 2700.0]),
            v(90.0),
        ],
        6 => vec![
            noise(140.0, Band::Sibilant),
            steady(110.0, IH, 1.0),
            closure(60.0, VELAR),
            noise(15.0, Band::Velar),
            noise(25.0, Band::Aspiration),
            noise(150.0, Band::Sibilant),
        ],
        7 => vec![
            noise(140.0, Band::Sibilant),
            steady(100.0, EH, 1.0),
            v(60.0),
            steady(70.0, AH, 0.9),
            steady(110.0, N, 0.35),
        ],
        8 => {
            let mut v = vec![glide(220.0, [480.0, 1850.0, 2500.0], [320.0, 2200.0, 2800.0])];
            v.extend(t_release());
            v
        }
        9 => vec![
            steady(90.0, N, 0.35),
            glide(220.0, [720.0, 1250.0, 2500.0], [380.0, 2100.0, 2700.0]),
            steady(130.0, N, 0.35),
        ],
        _ => unreachable!("digit checked by caller"),
    }
}

/// Piecewise-linear interpolation over sorted `(time, value)` knots.
fn interp(knots: &[(f64, f64)], t: f64) -> f64 {
    match knots.iter().position(|k| k.0 > t) {
        None => knots.last().map_or(0.0, |k| k.1),
        Some(0) => knots[0].1,
        Some(i) => {
            let (t0, v0) = knots[i - 1];
            let (t1, v1) = knots[i];
            if t1 > t0 {
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            } else {
                v1
            }
        }
    }
}

/// Klatt two-pole resonator with unity gain at DC.
#[derive(Default)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn step(&mut self, x: f64, freq: f64, bw: f64, rate: f64) -> f64 {
        let c = -(-2.0 * PI * bw / rate).exp();
        let b = 2.0 * (-PI * bw / rate).exp() * (2.0 * PI * freq / rate).cos();
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Rosenberg glottal flow at phase `p` in `[0, 1)`.
fn glottal(p: f64, open: f64) -> f64 {
    let rise = open * 0.7;
    let fall = open - rise;
    if p < rise {
        0.5 * (1.0 - (PI * p / rise).cos())
    } else if p < open {
        (0.5 * PI * (p - rise) / fall).cos()
    } else {
        0.0
    }
}

fn band_noise(len: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    Cascade::butterworth(FilterKind::HighPass, lo, 4, SYNTH_RATE).run(&mut x);
    Cascade::butterworth(FilterKind::LowPass, hi.min(0.45 * SYNTH_RATE), 4, SYNTH_RATE).run(&mut x);
    let r = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v /= r);
    }
    x
}

/// One take of `digit` by `voice`, resampled to `rate`.
///
/// `take` and `seed` select the per-utterance variation: phone durations,
/// formant jitter, pitch, leading and trailing silence, level and a faint
/// background hiss.
pub fn synthesize_digit(
    digit: usize,
    voice: &Voice,
    take: u32,
    seed: u64,
    rate: f64,
) -> Result<AudioBuffer, ClassifierError> {
    if digit >= 10 {
        return Err(ClassifierError::InvalidLabel(digit));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, digit as u64, take as u64, name_hash(&voice.name)]));
    let fs = SYNTH_RATE;
    let phones = lexicon(digit);

    // timeline in seconds
    let lead = rng.random_range(0.04..0.16);
    let mut bounds = Vec::with_capacity(phones.len() + 1);
    let mut t = lead;
    bounds.push(t);
    for p in &phones {
        t += p.ms * 1e-3 * voice.tempo * rng.random_range(0.85..1.15);
        bounds.push(t);
    }
    let speech_end = t;
    let total = speech_end + rng.random_range(0.04..0.16);
    let len = (total * fs).ceil() as usize;

    // formant and voicing knots
    let jitter = Normal::new(1.0, 0.03).expect("valid normal");
    let mut fk: [Vec<(f64, f64)>; 3] = Default::default();
    let mut vk = vec![(0.0, 0.0), (lead, 0.0)];
    for (i, p) in phones.iter().enumerate() {
        let (s, e) = (bounds[i], bounds[i + 1]);
        let d = e - s;
        if let Some((a, b)) = p.formants {
            let j = jitter.sample(&mut rng);
            for k in 0..3 {
                fk[k].push((s + 0.25 * d, a[k] * voice.formant_scale * j));
                fk[k].push((s + 0.75 * d, b[k] * voice.formant_scale * j));
            }
        }
        let edge = d.min(0.04) * 0.5;
        vk.push((s + edge, p.voicing));
        vk.push((e - edge, p.voicing));
    }
    vk.push((speech_end + 0.015, 0.0));

    // voiced path
    let f0_mean = voice.f0 * rng.random_range(0.92..1.08);
    let f0_rise = rng.random_range(1.02..1.12);
    let f0_fall = rng.random_range(0.8..0.92);
    let bandwidths = [70.0, 110.0, 160.0, 250.0, 320.0];
    let upper = [3500.0 * voice.formant_scale, 4500.0 * voice.formant_scale];
    let mut res: [Resonator; 5] = Default::default();
    let mut phase = 0.0f64;
    let mut period_scale = 1.0;
    let mut prev_flow = 0.0;
    let mut voiced = vec![0.0; len];
    let mut voiced_sq = 0.0;
    let mut voiced_n = 0usize;
    for (n, out) in voiced.iter_mut().enumerate() {
        let t = n as f64 / fs;
        let amp = interp(&vk, t);
        let progress = ((t - lead) / (speech_end - lead)).clamp(0.0, 1.0);
        let f0 = f0_mean * (f0_rise + (f0_fall - f0_rise) * progress) * period_scale;
        phase += f0 / fs;
        if phase >= 1.0 {
            phase -= 1.0;
            period_scale = 1.0 + 0.01 * rng.random_range(-1.0..1.0);
        }
        let flow = glottal(phase, voice.open_quotient);
        let aspiration: f64 = StandardNormal.sample(&mut rng);
        let source = amp * ((flow - prev_flow) * fs / f0_mean + voice.breathiness * aspiration * flow);
        prev_flow = flow;
        let mut y = source;
        for k in 0..3 {
            y = res[k].step(y, interp(&fk[k], t), bandwidths[k], fs);
        }
        for k in 0..2 {
            y = res[3 + k].step(y, upper[k], bandwidths[3 + k], fs);
        }
        *out = y;
        if amp > 0.5 {
            voiced_sq += y * y;
            voiced_n += 1;
        }
    }
    let voiced_rms = if voiced_n > 0 {
        (voiced_sq / voiced_n as f64).sqrt()
    } else {
        1.0
    };

    // noise path, one band-limited burst per noisy phone
    let mut signal = voiced;
    for (i, p) in phones.iter().enumerate() {
        let Some(band) = p.noise else { continue };
        let (lo, hi, level) = band.shape();
        let s = (bounds[i] * fs) as usize;
        let e = ((bounds[i + 1] * fs) as usize).min(len);
        if e <= s {
            continue;
        }
        let pad = (0.01 * fs) as usize;
        let raw = band_noise(e - s + 2 * pad, lo, hi, &mut rng);
        let seg = e - s;
        let ramp = (seg as f64 * 0.25).min(0.02 * fs).max(1.0);
        let gain = level * voiced_rms * rng.random_range(0.8..1.25);
        for k in 0..seg {
            let edge = (k as f64 / ramp).min((seg - 1 - k) as f64 / ramp).min(1.0);
            let w = 0.5 * (1.0 - (PI * edge).cos());
            signal[s + k] += gain * w * raw[pad + k];
        }
    }

    let buffer = AudioBuffer::new(signal, fs)?;
    let at_rate = if rate == fs { buffer } else { resample(&buffer, rate)? };
    let peak = at_rate.peak();
    let level = rng.random_range(0.3..0.9);
    let hiss = level * 10f64.powf(-rng.random_range(35.0..45.0) / 20.0);
    let samples = at_rate
        .samples()
        .iter()
        .map(|v| {
            let h: f64 = StandardNormal.sample(&mut rng);
            v / peak * level + hiss * h
        })
        .collect();
    Ok(AudioBuffer::new(samples, rate)?)
}

fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Size and sampling of a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub voices: usize,
    pub takes: u32,
    pub rate: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            voices: 6,
            takes: 50,
            rate: 8000.0,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn len(&self) -> usize {
        10 * self.voices * self.takes as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every (digit, voice, take) in file-name order. Paths are bare file names.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<Utterance>, ClassifierError> {
    if spec.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if !(spec.rate >= 4000.0 && spec.rate <= SYNTH_RATE) {
        return Err(ClassifierError::InvalidConfig(format!(
            "corpus rate {} outside [4000, 48000] Hz",
            spec.rate
        )));
    }
    let vs = voices(spec.voices, spec.seed);
    let mut out = Vec::with_capacity(spec.len());
    for digit in 0..10 {
        for v in &vs {
            for take in 0..spec.takes {
                let audio = synthesize_digit(digit, v, take, spec.seed, spec.rate)?;
                out.push(Utterance {
                    path: PathBuf::from(format!("{digit}_{}_{take}.wav", v.name)),
                    digit,
                    speaker: v.name.clone(),
                    index: take,
                    audio,
                });
            }
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Writes the corpus as 16-bit WAVs and returns the written paths.
pub fn write_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<PathBuf>, ClassifierError> {
    std::fs::create_dir_all(dir).map_err(|source| ClassifierError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::with_capacity(spec.len());
    for u in generate(spec)? {
        let path = dir.join(&u.path);
        save_wav(&u.audio, &path, BitDepth::Pcm16)?;
        paths.push(path);
    }
    Ok(paths)
}
