//! FiLM-conditioned three-way classifier over window text.
//!
//! `probs = softmax(W · (γ(c) ⊙ encode(text) + β(c)) + b)` with class order
//! `(turn_claim, backchannel, stay_silent)`. Everything runs in `f64` with
//! hand-written backpropagation.

mod checkpoint;
mod classifier;
mod encoder;
mod film;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use classifier::{softmax, DecisionRule, Example, FilmClassifier, ModelConfig, Prediction};
pub use encoder::{fnv1a, EncoderConfig, Features, ReferenceEncoder, TextEncoder};
pub use film::FilmLayer;
pub use train::{lr_multiplier, train, AdamW, EpochRecord, TrainConfig, TrainOutcome};

/// Read-only view of one parameter tensor.
#[derive(Debug)]
pub struct Param<'a> {
    pub name: &'static str,
    pub data: &'a [f64],
    /// Whether weight decay applies; biases are exempt.
    pub decay: bool,
}

#[derive(Debug)]
pub struct ParamMut<'a> {
    pub name: &'static str,
    pub data: &'a mut [f64],
    pub decay: bool,
}

pub(crate) fn xavier<R: rand::Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

/// `out += W · x` for row-major `W` of shape `out.len() × x.len()`.
pub(crate) fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dw += dy ⊗ x` and `dx += Wᵀ · dy`.
pub(crate) fn matvec_backward(w: &[f64], x: &[f64], dy: &[f64], dw: &mut [f64], dx: Option<&mut [f64]>) {
    let n = x.len();
    for (&g, row) in dy.iter().zip(dw.chunks_exact_mut(n)) {
        if g != 0.0 {
            for (d, &xi) in row.iter_mut().zip(x) {
                *d += g * xi;
            }
        }
    }
    if let Some(dx) = dx {
        for (&g, row) in dy.iter().zip(w.chunks_exact(n)) {
            if g != 0.0 {
                for (d, &wi) in dx.iter_mut().zip(row) {
                    *d += g * wi;
                }
            }
        }
    }
}
