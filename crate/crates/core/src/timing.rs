//! Per-phoneme timing: durations, peak-influence times `μ` and widths `σ`
//! predicted by a recurrent encoder, and their expansion into the `t × n`
//! Gaussian influence matrix.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lexicon::{Inventory, PhonemeSequence};
use crate::nn::{prefixed, prefixed_mut, sigmoid, softplus, BiGruStack, Linear, ParamSet, StackTrace, Tensor2};

/// Shortest phoneme duration the encoder can predict, in frames.
pub const D_MIN: f64 = 3.0;
/// Narrowest influence kernel, in frames.
pub const SIGMA_MIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub durations: Vec<f64>,
    /// `round(Σ durations)`, at least `n`.
    pub total_frames: usize,
}

impl TimingParams {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, durations: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 || sigma.len() != n || durations.len() != n {
            return Err(Error::Shape(format!(
                "timing needs equal non-empty mu/sigma/durations, got {}/{}/{}",
                n,
                sigma.len(),
                durations.len()
            )));
        }
        let total: f64 = durations.iter().sum();
        if !total.is_finite() || durations.iter().any(|d| !(*d > 0.0)) || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Invariant("timing durations and widths must be positive and finite".into()));
        }
        if mu.iter().any(|m| !(*m >= 0.0 && *m < total)) || mu.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!("timing peaks {mu:?} not increasing inside [0, {total})")));
        }
        Ok(TimingParams {
            mu,
            sigma,
            durations,
            total_frames: (total.round() as usize).max(n),
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Timing from raw encoder outputs (`n × 2`): duration from column 0,
    /// width from column 1.
    pub fn from_raw(raw: &Tensor2) -> Result<Self> {
        if raw.cols() != 2 {
            return Err(Error::Shape(format!("timing head must emit 2 values, got {}", raw.cols())));
        }
        let durations: Vec<f64> = (0..raw.rows()).map(|i| softplus(raw.get(i, 0)) + D_MIN).collect();
        let sigma = (0..raw.rows()).map(|i| softplus(raw.get(i, 1)) + SIGMA_MIN).collect();
        let mut mu = Vec::with_capacity(durations.len());
        let mut acc = 0.0;
        for d in &durations {
            acc += d;
            mu.push(acc - d / 2.0);
        }
        TimingParams::new(mu, sigma, durations)
    }

    /// Chain rule from `(∂L/∂μ, ∂L/∂σ, ∂L/∂Σd)` back to the raw outputs.
    pub fn backward_raw(raw: &Tensor2, d_mu: &[f64], d_sigma: &[f64], d_total: f64) -> Tensor2 {
        let n = raw.rows();
        let mut d_raw = Tensor2::zeros(n, 2);
        // μ_i = Σ_{j<i} d_j + d_i / 2
        let mut later = 0.0;
        for j in (0..n).rev() {
            let d_dur = later + d_mu[j] / 2.0 + d_total;
            later += d_mu[j];
            d_raw.set(j, 0, d_dur * sigmoid(raw.get(j, 0)));
            d_raw.set(j, 1, d_sigma[j] * sigmoid(raw.get(j, 1)));
        }
        d_raw
    }

    /// `phoneme,mu_frames,sigma_frames` rows.
    pub fn to_csv(&self, seq: &PhonemeSequence) -> Result<String> {
        if seq.len() != self.len() {
            return Err(Error::Shape(format!("{} phonemes for {} timing rows", seq.len(), self.len())));
        }
        let mut out = String::from("phoneme,mu_frames,sigma_frames\n");
        for ((p, m), s) in seq.tokens().iter().zip(&self.mu).zip(&self.sigma) {
            writeln!(out, "{p},{m},{s}").unwrap();
        }
        Ok(out)
    }
}

/// `M'`: `t × n` Gaussian influence of each phoneme at each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    pub values: Tensor2,
}

impl InfluenceMatrix {
    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn phones(&self) -> usize {
        self.values.cols()
    }
}

/// `M'_{k,i} = exp(−(k − μ_i)² / (2σ_i²))` for `k = 0..t`.
pub fn gaussian_expand(tp: &TimingParams, t: usize) -> Result<InfluenceMatrix> {
    if t == 0 {
        return Err(Error::Param("influence matrix needs at least one frame".into()));
    }
    if let Some(s) = tp.sigma.iter().find(|s| !(**s >= SIGMA_MIN)) {
        return Err(Error::Invariant(format!("kernel width {s} below floor {SIGMA_MIN}")));
    }
    let n = tp.len();
    let mut m = Tensor2::zeros(t, n);
    for k in 0..t {
        for i in 0..n {
            let z = (k as f64 - tp.mu[i]) / tp.sigma[i];
            m.set(k, i, (-0.5 * z * z).exp());
        }
    }
    Ok(InfluenceMatrix { values: m })
}

/// Given `∂L/∂M'`, returns `(∂L/∂μ, ∂L/∂σ)`.
pub fn gaussian_expand_backward(tp: &TimingParams, m: &InfluenceMatrix, d_m: &Tensor2) -> (Vec<f64>, Vec<f64>) {
    let n = tp.len();
    let mut d_mu = vec![0.0; n];
    let mut d_sigma = vec![0.0; n];
    for k in 0..m.frames() {
        for i in 0..n {
            let g = d_m.get(k, i) * m.values.get(k, i);
            if g == 0.0 {
                continue;
            }
            let diff = k as f64 - tp.mu[i];
            let s2 = tp.sigma[i] * tp.sigma[i];
            d_mu[i] += g * diff / s2;
            d_sigma[i] += g * diff * diff / (s2 * tp.sigma[i]);
        }
    }
    (d_mu, d_sigma)
}

/// `f_θ`: bidirectional GRU over one-hot phonemes with a 2-value head.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingEncoder {
    pub stack: BiGruStack,
    pub head: Linear,
}

pub struct EncoderTrace {
    stack: StackTrace,
    hidden: Tensor2,
    pub raw: Tensor2,
}

pub fn one_hot_matrix(seq: &PhonemeSequence) -> Tensor2 {
    let mut x = Tensor2::zeros(seq.len(), Inventory::SIZE);
    for (i, p) in seq.tokens().iter().enumerate() {
        x.set(i, p.index(), 1.0);
    }
    x
}

impl TimingEncoder {
    pub fn zeros(hidden: usize, layers: usize) -> Self {
        TimingEncoder {
            stack: BiGruStack::zeros(Inventory::SIZE, hidden, layers),
            head: Linear::zeros(2 * hidden, 2),
        }
    }

    pub fn init(hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        TimingEncoder {
            stack: BiGruStack::init(Inventory::SIZE, hidden, layers, rng),
            head: Linear::init(2 * hidden, 2, rng),
        }
    }

    pub fn forward_trace(&self, seq: &PhonemeSequence) -> Result<EncoderTrace> {
        let input = one_hot_matrix(seq);
        let (hidden, stack) = self.stack.forward_trace(&input)?;
        let raw = self.head.forward(&hidden)?;
        Ok(EncoderTrace {
            stack,
            hidden,
            raw,
        })
    }

    /// Accumulates gradients given `∂L/∂raw`.
    pub fn backward(&self, trace: &EncoderTrace, d_raw: &Tensor2, grads: &mut TimingEncoder) {
        let d_hidden = self.head.backward(&trace.hidden, d_raw, &mut grads.head);
        self.stack.backward(&trace.stack, &d_hidden, &mut grads.stack);
    }
}

impl ParamSet for TimingEncoder {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out: Vec<_> = prefixed("stack", self.stack.tensors()).collect();
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut out: Vec<_> = prefixed_mut("stack", self.stack.tensors_mut()).collect();
        out.extend(prefixed_mut("head", self.head.tensors_mut()));
        out
    }
}

/// Runs the encoder and converts its outputs to timing.
pub fn predict_timing(encoder: &TimingEncoder, seq: &PhonemeSequence) -> Result<TimingParams> {
    TimingParams::from_raw(&encoder.forward_trace(seq)?.raw)
}
