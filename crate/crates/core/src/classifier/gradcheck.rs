//! Central finite differences against the hand-written backward pass.

use rand::seq::index::sample;

use super::network::{Network, TENSOR_NAMES};
use super::ClassifierError;
use crate::channel::noise::stream;

/// Weights checked in each tensor (all of them when the tensor is smaller).
pub const DEFAULT_SAMPLES: usize = 50;
/// Candidates drawn per wanted sample, so coordinates that cross a ReLU or
/// max-pool kink can be passed over.
const CANDIDATES_PER_SAMPLE: usize = 4;
/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub checked: usize,
    /// Coordinates left out because `+epsilon` and `-epsilon` landed on
    /// different sides of a kink, where central differences are meaningless.
    pub skipped: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.tensors.iter().map(|t| t.skipped).sum()
    }

    /// Every tensor had at least one coordinate compared.
    pub fn covers_every_tensor(&self) -> bool {
        self.tensors.iter().all(|t| t.checked > 0)
    }
}

/// Edits the analytic gradients in place.
pub type GradientHook<'a> = &'a dyn Fn(&mut [Vec<f64>]);

pub struct GradCheckOptions<'a> {
    pub epsilon: f64,
    pub samples_per_tensor: usize,
    pub seed: u64,
    /// Applied to the analytic gradients before comparison; used to confirm
    /// that a broken backward pass is caught.
    pub corrupt: Option<GradientHook<'a>>,
}

impl Default for GradCheckOptions<'_> {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            samples_per_tensor: DEFAULT_SAMPLES,
            seed: 0,
            corrupt: None,
        }
    }
}

/// `|analytic - numeric| / max(|analytic|, |numeric|, MAGNITUDE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Runs in `f64` with dropout off.
pub fn grad_check<T: super::real::Real>(
    model: &Network<T>,
    input: &[f32],
    label: usize,
    opts: &GradCheckOptions<'_>,
) -> Result<GradCheckReport, ClassifierError> {
    if !(1e-6..=1e-3).contains(&opts.epsilon) {
        return Err(ClassifierError::InvalidConfig(format!(
            "epsilon {} must lie in [1e-6, 1e-3]",
            opts.epsilon
        )));
    }
    let mut net: Network<f64> = model.cast();
    let x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let mut analytic = net.loss_and_gradients(&[&x], &[label], None)?.grads;
    if let Some(f) = opts.corrupt {
        f(&mut analytic);
    }

    let mut rng = stream(opts.seed, 20);
    let mut tensors = Vec::with_capacity(net.params.len());
    for t in 0..net.params.len() {
        let len = net.params[t].len();
        let want = opts.samples_per_tensor;
        let candidates: Vec<usize> = if len <= want {
            (0..len).collect()
        } else {
            sample(&mut rng, len, (want * CANDIDATES_PER_SAMPLE).min(len)).into_vec()
        };
        let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
        for &i in &candidates {
            if checked == want {
                break;
            }
            let orig = net.params[t][i];
            net.params[t][i] = orig + opts.epsilon;
            let (up, above) = net.loss_and_pattern(&[&x], &[label])?;
            net.params[t][i] = orig - opts.epsilon;
            let (down, below) = net.loss_and_pattern(&[&x], &[label])?;
            net.params[t][i] = orig;
            if above != below {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (up - down) / (2.0 * opts.epsilon);
            let a = analytic[t][i];
            if !a.is_finite() || !numeric.is_finite() {
                worst = f64::INFINITY;
            } else {
                worst = worst.max(relative_error(a, numeric));
            }
        }
        tensors.push(TensorCheck {
            name: TENSOR_NAMES[t],
            checked,
            skipped,
            max_relative_error: worst,
        });
    }
    Ok(GradCheckReport { tensors })
}
