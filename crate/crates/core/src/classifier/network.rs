//! The convolutional network: two 3x3 convolutions with ReLU and 2x2 max
//! pooling, two ReLU dense layers with dropout, and a softmax output.
//!
//! Convolutions run as im2col plus GEMM one sample at a time; the dense
//! layers run batched. Backward passes are written out by hand.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::real::{gemm, Real};
use super::ClassifierError;

pub const CONV1_W: usize = 0;
pub const CONV1_B: usize = 1;
pub const CONV2_W: usize = 2;
pub const CONV2_B: usize = 3;
pub const DENSE1_W: usize = 4;
pub const DENSE1_B: usize = 5;
pub const DENSE2_W: usize = 6;
pub const DENSE2_B: usize = 7;
pub const OUT_W: usize = 8;
pub const OUT_B: usize = 9;
pub const TENSOR_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
    "output.weight",
    "output.bias",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub input: usize,
    pub kernel: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl Default for Arch {
    fn default() -> Self {
        Self {
            input: 130,
            kernel: 3,
            conv1: 16,
            conv2: 32,
            dense1: 128,
            dense2: 64,
            classes: 10,
            dropout: 0.5,
        }
    }
}

impl Arch {
    pub fn conv1_out(&self) -> usize {
        self.input - self.kernel + 1
    }
    pub fn pool1_out(&self) -> usize {
        self.conv1_out() / 2
    }
    pub fn conv2_out(&self) -> usize {
        self.pool1_out() - self.kernel + 1
    }
    pub fn pool2_out(&self) -> usize {
        self.conv2_out() / 2
    }
    pub fn flat(&self) -> usize {
        self.conv2 * self.pool2_out() * self.pool2_out()
    }
    pub fn input_len(&self) -> usize {
        self.input * self.input
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let ok = self.kernel >= 1
            && self.input >= self.kernel
            && self.conv1_out() >= 2
            && self.pool1_out() >= self.kernel
            && self.conv2_out() >= 2
            && [self.conv1, self.conv2, self.dense1, self.dense2]
                .iter()
                .all(|&n| n > 0)
            && self.classes >= 2
            && (0.0..1.0).contains(&self.dropout);
        if ok {
            Ok(())
        } else {
            Err(ClassifierError::InvalidArch(format!("{self:?}")))
        }
    }

    /// Element counts of the ten parameter tensors, in storage order.
    pub fn tensor_lens(&self) -> [usize; 10] {
        let k2 = self.kernel * self.kernel;
        [
            self.conv1 * k2,
            self.conv1,
            self.conv2 * self.conv1 * k2,
            self.conv2,
            self.dense1 * self.flat(),
            self.dense1,
            self.dense2 * self.dense1,
            self.dense2,
            self.classes * self.dense2,
            self.classes,
        ]
    }

    /// Fan-in of each weight tensor, for He initialization.
    fn fan_in(&self, tensor: usize) -> usize {
        let k2 = self.kernel * self.kernel;
        match tensor {
            CONV1_W => k2,
            CONV2_W => self.conv1 * k2,
            DENSE1_W => self.flat(),
            DENSE2_W => self.dense1,
            OUT_W => self.dense2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real> {
    pub arch: Arch,
    pub params: Vec<Vec<T>>,
}

pub type CnnModel = Network<f32>;

/// Dropout state for a training pass.
pub struct Dropout<'a> {
    pub rng: &'a mut ChaCha8Rng,
}

/// Per-sample activations kept for the backward pass. Convolution inputs are
/// rebuilt from the pooled maps, so only pooled values and argmax indices are stored.
struct ConvCache<T> {
    pool1: Vec<T>,
    idx1: Vec<u32>,
    idx2: Vec<u32>,
}

struct DenseCache<T> {
    x: Vec<T>,
    z1: Vec<T>,
    a1: Vec<T>,
    m1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    m2: Vec<T>,
    probs: Vec<f64>,
}

impl<T: Real> Network<T> {
    pub fn new(arch: Arch, seed: u64) -> Result<Self, ClassifierError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = arch
            .tensor_lens()
            .iter()
            .enumerate()
            .map(|(t, &len)| {
                let fan = arch.fan_in(t);
                if fan == 0 {
                    vec![T::ZERO; len]
                } else {
                    let normal = Normal::new(0.0, (2.0 / fan as f64).sqrt()).expect("positive std");
                    (0..len).map(|_| T::from_f64(normal.sample(&mut rng))).collect()
                }
            })
            .collect();
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Arch, params: Vec<Vec<T>>) -> Result<Self, ClassifierError> {
        arch.validate()?;
        let lens = arch.tensor_lens();
        if params.len() != lens.len() || params.iter().zip(lens).any(|(p, l)| p.len() != l) {
            return Err(ClassifierError::InvalidArch(
                "parameter shapes do not match the architecture".into(),
            ));
        }
        Ok(Self { arch, params })
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            params: self
                .params
                .iter()
                .map(|t| t.iter().map(|v| U::from_f64(v.to_f64())).collect())
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|t| vec![T::ZERO; t.len()]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    fn check_input(&self, x: &[T]) -> Result<(), ClassifierError> {
        if x.len() != self.arch.input_len() {
            return Err(ClassifierError::ShapeMismatch {
                expected: self.arch.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Class probabilities for each input, with dropout off.
    pub fn probabilities(&self, inputs: &[&[T]]) -> Result<Vec<Vec<f64>>, ClassifierError> {
        for x in inputs {
            self.check_input(x)?;
        }
        let (_, dense) = self.forward(inputs, None);
        let c = self.arch.classes;
        Ok(dense.probs.chunks(c).map(<[f64]>::to_vec).collect())
    }

    /// Mean cross-entropy over the batch and its gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&[T]],
        labels: &[usize],
        dropout: Option<Dropout<'_>>,
    ) -> Result<BatchResult<T>, ClassifierError> {
        for x in inputs {
            self.check_input(x)?;
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.arch.classes) {
            return Err(ClassifierError::InvalidLabel(bad));
        }
        assert_eq!(inputs.len(), labels.len(), "one label per input");
        let (conv, dense) = self.forward(inputs, dropout);
        let c = self.arch.classes;
        let loss = cross_entropy(&dense.probs, labels, c);
        let correct = dense
            .probs
            .chunks(c)
            .zip(labels)
            .filter(|(p, &l)| argmax(p) == l)
            .count();
        let grads = self.backward(inputs, labels, &conv, &dense);
        Ok(BatchResult { loss, grads, correct })
    }

    /// Mean cross-entropy without gradients, dropout off.
    pub fn loss(&self, inputs: &[&[T]], labels: &[usize]) -> Result<f64, ClassifierError> {
        for x in inputs {
            self.check_input(x)?;
        }
        let (_, dense) = self.forward(inputs, None);
        Ok(cross_entropy(&dense.probs, labels, self.arch.classes))
    }

    /// [`Network::loss`] plus a fingerprint of every ReLU sign and max-pool
    /// choice. Within one fingerprint the loss is smooth in the weights.
    pub fn loss_and_pattern(&self, inputs: &[&[T]], labels: &[usize]) -> Result<(f64, u64), ClassifierError> {
        for x in inputs {
            self.check_input(x)?;
        }
        let (conv, dense) = self.forward(inputs, None);
        let mut h = DefaultHasher::new();
        let on = |v: &[T]| v.iter().map(|&x| x > T::ZERO).collect::<Vec<bool>>();
        for c in &conv {
            c.idx1.hash(&mut h);
            c.idx2.hash(&mut h);
            on(&c.pool1).hash(&mut h);
        }
        on(&dense.x).hash(&mut h);
        on(&dense.z1).hash(&mut h);
        on(&dense.z2).hash(&mut h);
        Ok((cross_entropy(&dense.probs, labels, self.arch.classes), h.finish()))
    }

    fn forward(&self, inputs: &[&[T]], mut dropout: Option<Dropout<'_>>) -> (Vec<ConvCache<T>>, DenseCache<T>) {
        let a = &self.arch;
        let b = inputs.len();
        let flat = a.flat();
        let mut x = vec![T::ZERO; b * flat];
        let mut caches = Vec::with_capacity(b);
        for (s, input) in inputs.iter().enumerate() {
            let (cache, pooled) = self.conv_forward(input);
            x[s * flat..(s + 1) * flat].copy_from_slice(&pooled);
            caches.push(cache);
        }

        let p = &self.params;
        let keep = 1.0 - a.dropout;
        let mut mask = |n: usize| -> Vec<T> {
            match dropout.as_mut() {
                Some(d) if a.dropout > 0.0 => (0..n)
                    .map(|_| {
                        if d.rng.random::<f64>() < keep {
                            T::from_f64(1.0 / keep)
                        } else {
                            T::ZERO
                        }
                    })
                    .collect(),
                _ => vec![T::ONE; n],
            }
        };

        let z1 = affine(&x, b, flat, &p[DENSE1_W], &p[DENSE1_B], a.dense1);
        let m1 = mask(b * a.dense1);
        let a1: Vec<T> = z1.iter().zip(&m1).map(|(&z, &m)| relu(z) * m).collect();
        let z2 = affine(&a1, b, a.dense1, &p[DENSE2_W], &p[DENSE2_B], a.dense2);
        let m2 = mask(b * a.dense2);
        let a2: Vec<T> = z2.iter().zip(&m2).map(|(&z, &m)| relu(z) * m).collect();
        let logits = affine(&a2, b, a.dense2, &p[OUT_W], &p[OUT_B], a.classes);
        let probs = softmax_rows(&logits, a.classes);
        (
            caches,
            DenseCache {
                x,
                z1,
                a1,
                m1,
                z2,
                a2,
                m2,
                probs,
            },
        )
    }

    fn conv_forward(&self, input: &[T]) -> (ConvCache<T>, Vec<T>) {
        let a = &self.arch;
        let p = &self.params;
        let k = a.kernel;
        let (h1, h2) = (a.conv1_out(), a.conv2_out());

        let cols1 = im2col(input, 1, a.input, a.input, k);
        let mut out1 = vec![T::ZERO; a.conv1 * h1 * h1];
        conv_gemm(&p[CONV1_W], &p[CONV1_B], &cols1, a.conv1, k * k, h1 * h1, &mut out1);
        out1.iter_mut().for_each(|v| *v = relu(*v));
        let (pool1, idx1) = maxpool2(&out1, a.conv1, h1, h1);

        let p1 = a.pool1_out();
        let cols2 = im2col(&pool1, a.conv1, p1, p1, k);
        let mut out2 = vec![T::ZERO; a.conv2 * h2 * h2];
        conv_gemm(
            &p[CONV2_W],
            &p[CONV2_B],
            &cols2,
            a.conv2,
            a.conv1 * k * k,
            h2 * h2,
            &mut out2,
        );
        out2.iter_mut().for_each(|v| *v = relu(*v));
        let (pool2, idx2) = maxpool2(&out2, a.conv2, h2, h2);
        (ConvCache { pool1, idx1, idx2 }, pool2)
    }

    fn backward(&self, inputs: &[&[T]], labels: &[usize], conv: &[ConvCache<T>], d: &DenseCache<T>) -> Vec<Vec<T>> {
        let a = &self.arch;
        let p = &self.params;
        let b = inputs.len();
        let c = a.classes;
        let flat = a.flat();
        let mut g = self.zeros_like();

        let inv_b = 1.0 / b as f64;
        let mut dlogits = vec![T::ZERO; b * c];
        for s in 0..b {
            for j in 0..c {
                let y = if labels[s] == j { 1.0 } else { 0.0 };
                dlogits[s * c + j] = T::from_f64((d.probs[s * c + j] - y) * inv_b);
            }
        }

        let da2 = affine_backward(&dlogits, &d.a2, b, a.dense2, c, &p[OUT_W], &mut g, OUT_W, OUT_B);
        let dz2: Vec<T> = (0..b * a.dense2)
            .map(|i| if d.z2[i] > T::ZERO { da2[i] * d.m2[i] } else { T::ZERO })
            .collect();
        let da1 = affine_backward(
            &dz2,
            &d.a1,
            b,
            a.dense1,
            a.dense2,
            &p[DENSE2_W],
            &mut g,
            DENSE2_W,
            DENSE2_B,
        );
        let dz1: Vec<T> = (0..b * a.dense1)
            .map(|i| if d.z1[i] > T::ZERO { da1[i] * d.m1[i] } else { T::ZERO })
            .collect();
        let dx = affine_backward(&dz1, &d.x, b, flat, a.dense1, &p[DENSE1_W], &mut g, DENSE1_W, DENSE1_B);

        for s in 0..b {
            self.conv_backward(
                inputs[s],
                &conv[s],
                &d.x[s * flat..(s + 1) * flat],
                &dx[s * flat..(s + 1) * flat],
                &mut g,
            );
        }
        g
    }

    fn conv_backward(&self, input: &[T], cache: &ConvCache<T>, pool2: &[T], dpool2: &[T], g: &mut [Vec<T>]) {
        let a = &self.arch;
        let p = &self.params;
        let k = a.kernel;
        let (h1, h2, p1) = (a.conv1_out(), a.conv2_out(), a.pool1_out());

        // through pool2 and the ReLU in front of it
        let mut dout2 = vec![T::ZERO; a.conv2 * h2 * h2];
        for (i, &src) in cache.idx2.iter().enumerate() {
            if pool2[i] > T::ZERO {
                dout2[src as usize] += dpool2[i];
            }
        }
        let kk2 = a.conv1 * k * k;
        let cols2 = im2col(&cache.pool1, a.conv1, p1, p1, k);
        gemm(
            false,
            true,
            a.conv2,
            kk2,
            h2 * h2,
            T::ONE,
            &dout2,
            &cols2,
            T::ONE,
            &mut g[CONV2_W],
        );
        add_row_sums(&dout2, a.conv2, h2 * h2, &mut g[CONV2_B]);

        let mut dcols2 = vec![T::ZERO; kk2 * h2 * h2];
        gemm(
            true,
            false,
            kk2,
            h2 * h2,
            a.conv2,
            T::ONE,
            &p[CONV2_W],
            &dout2,
            T::ZERO,
            &mut dcols2,
        );
        let dpool1 = col2im(&dcols2, a.conv1, p1, p1, k);

        let mut dout1 = vec![T::ZERO; a.conv1 * h1 * h1];
        for (i, &src) in cache.idx1.iter().enumerate() {
            if cache.pool1[i] > T::ZERO {
                dout1[src as usize] += dpool1[i];
            }
        }
        let cols1 = im2col(input, 1, a.input, a.input, k);
        gemm(
            false,
            true,
            a.conv1,
            k * k,
            h1 * h1,
            T::ONE,
            &dout1,
            &cols1,
            T::ONE,
            &mut g[CONV1_W],
        );
        add_row_sums(&dout1, a.conv1, h1 * h1, &mut g[CONV1_B]);
    }
}

pub struct BatchResult<T> {
    pub loss: f64,
    pub grads: Vec<Vec<T>>,
    /// Samples whose most probable class was the label.
    pub correct: usize,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn relu<T: Real>(v: T) -> T {
    if v > T::ZERO {
        v
    } else {
        T::ZERO
    }
}

/// `Y (b x out) = X (b x inp) W^T + bias`, with `W` stored out x inp.
fn affine<T: Real>(x: &[T], b: usize, inp: usize, w: &[T], bias: &[T], out: usize) -> Vec<T> {
    let mut y: Vec<T> = (0..b).flat_map(|_| bias.iter().copied()).collect();
    gemm(false, true, b, out, inp, T::ONE, x, w, T::ONE, &mut y);
    y
}

/// Accumulates weight and bias gradients and returns the input gradient.
#[allow(clippy::too_many_arguments)]
fn affine_backward<T: Real>(
    dy: &[T],
    x: &[T],
    b: usize,
    inp: usize,
    out: usize,
    w: &[T],
    g: &mut [Vec<T>],
    wi: usize,
    bi: usize,
) -> Vec<T> {
    gemm(true, false, out, inp, b, T::ONE, dy, x, T::ONE, &mut g[wi]);
    for s in 0..b {
        for j in 0..out {
            g[bi][j] += dy[s * out + j];
        }
    }
    let mut dx = vec![T::ZERO; b * inp];
    gemm(false, false, b, inp, out, T::ONE, dy, w, T::ZERO, &mut dx);
    dx
}

fn add_row_sums<T: Real>(m: &[T], rows: usize, cols: usize, acc: &mut [T]) {
    for r in 0..rows {
        let mut s = T::ZERO;
        for &v in &m[r * cols..(r + 1) * cols] {
            s += v;
        }
        acc[r] += s;
    }
}

fn conv_gemm<T: Real>(w: &[T], bias: &[T], cols: &[T], filters: usize, kk: usize, positions: usize, out: &mut [T]) {
    for (f, row) in out.chunks_mut(positions).enumerate() {
        row.iter_mut().for_each(|v| *v = bias[f]);
    }
    gemm(false, false, filters, positions, kk, T::ONE, w, cols, T::ONE, out);
}

/// Valid-padding patches of a `c x h x w` map as a `(c k k) x (oh ow)` matrix.
pub(crate) fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut cols = vec![T::ZERO; c * k * k * oh * ow];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let src = &x[ci * h * w + (oy + ky) * w + kx..][..ow];
                    dst[oy * ow..(oy + 1) * ow].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub(crate) fn col2im<T: Real>(cols: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut x = vec![T::ZERO; c * h * w];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let dst = &mut x[ci * h * w + (oy + ky) * w + kx..][..ow];
                    for (d, s) in dst.iter_mut().zip(&src[oy * ow..(oy + 1) * ow]) {
                        *d += *s;
                    }
                }
            }
        }
    }
    x
}

/// Non-overlapping 2x2 max pooling; odd trailing rows and columns are dropped.
/// Returns the pooled map and, per output, the flat index of the winning input.
pub(crate) fn maxpool2<T: Real>(x: &[T], c: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (ph, pw) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * ph * pw);
    let mut idx = Vec::with_capacity(c * ph * pw);
    for ci in 0..c {
        for py in 0..ph {
            for px in 0..pw {
                let base = ci * h * w + 2 * py * w + 2 * px;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

fn softmax_rows<T: Real>(logits: &[T], c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(c) {
        let m = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v.to_f64() - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    out
}

fn cross_entropy(probs: &[f64], labels: &[usize], c: usize) -> f64 {
    let n = labels.len().max(1) as f64;
    labels
        .iter()
        .enumerate()
        .map(|(s, &l)| -(probs[s * c + l].max(f64::MIN_POSITIVE)).ln())
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> Arch {
        Arch {
            input: 12,
            kernel: 3,
            conv1: 2,
            conv2: 3,
            dense1: 5,
            dense2: 4,
            classes: 10,
            dropout: 0.5,
        }
    }

    #[test]
    fn default_shapes() {
        let a = Arch::default();
        assert_eq!(
            (a.conv1_out(), a.pool1_out(), a.conv2_out(), a.pool2_out()),
            (128, 64, 62, 31)
        );
        assert_eq!(a.flat(), 32 * 31 * 31);
        assert_eq!(a.tensor_lens()[DENSE1_W], 128 * 30752);
    }

    #[test]
    fn pooling_halves_with_floor() {
        let x: Vec<f64> = (0..5 * 7).map(|i| i as f64).collect();
        let (out, idx) = maxpool2(&x, 1, 5, 7);
        assert_eq!(out.len(), 2 * 3);
        // each window's max is its bottom-right corner for an increasing ramp
        assert_eq!(out, vec![8.0, 10.0, 12.0, 22.0, 24.0, 26.0]);
        assert_eq!(idx[0], 8);
    }

    #[test]
    fn im2col_and_col2im_are_adjoint() {
        let (c, h, w, k) = (2, 5, 6, 3);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.7).sin()).collect();
        let cols = im2col(&x, c, h, w, k);
        let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let back = col2im(&y, c, h, w, k);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let arch = tiny();
        let net = Network::<f64>::new(arch, 3).unwrap();
        let x: Vec<f64> = (0..144).map(|i| ((i * 7 % 13) as f64) / 13.0).collect();
        let cols = im2col(&x, 1, 12, 12, 3);
        let mut out = vec![0.0; 2 * 100];
        conv_gemm(&net.params[CONV1_W], &net.params[CONV1_B], &cols, 2, 9, 100, &mut out);
        for f in 0..2 {
            for oy in 0..10 {
                for ox in 0..10 {
                    let mut s = net.params[CONV1_B][f];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            s += net.params[CONV1_W][f * 9 + ky * 3 + kx] * x[(oy + ky) * 12 + ox + kx];
                        }
                    }
                    assert!((out[f * 100 + oy * 10 + ox] - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = Network::<f32>::new(tiny(), 1).unwrap();
        let x: Vec<f32> = (0..144).map(|i| (i % 5) as f32 / 4.0).collect();
        let p = net.probabilities(&[&x, &x]).unwrap();
        for row in &p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(p[0], p[1]);
        assert!(net.probabilities(&[&x[..100]]).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Network::<f32>::new(Arch::default(), 9).unwrap();
        let b = Network::<f32>::new(Arch::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Network::<f32>::new(Arch::default(), 10).unwrap());
    }
}
