use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::film::FilmCache;
use super::{matvec_add, matvec_backward, xavier, EncoderConfig, FilmLayer, Param, ParamMut, ReferenceEncoder, TextEncoder};
use crate::Label;

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub film_hidden: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            film_hidden: 16,
            init_seed: 42,
        }
    }
}

/// One training or evaluation example.
#[derive(Debug, Clone)]
pub struct Example<I> {
    pub input: I,
    pub controls: [f64; 2],
    pub label: Label,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FilmClassifier<E: TextEncoder = ReferenceEncoder> {
    pub encoder: E,
    pub film: FilmLayer,
    /// `3 × d`, row-major, rows in [`Label::ALL`] order.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

struct Trace<C> {
    h: Vec<f64>,
    enc: C,
    film: FilmCache,
    y: Vec<f64>,
    probs: Vec<f64>,
}

impl FilmClassifier<ReferenceEncoder> {
    pub fn new(config: &ModelConfig) -> Self {
        let encoder = ReferenceEncoder::new(config.encoder, config.init_seed);
        Self::with_encoder(encoder, config.film_hidden, config.init_seed)
    }
}

impl<E: TextEncoder> FilmClassifier<E> {
    /// Wrap an encoder with an identity FiLM layer and a fresh head.
    pub fn with_encoder(encoder: E, film_hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let d = encoder.dim();
        let film = FilmLayer::identity(d, film_hidden, &mut rng);
        let head_w = xavier(&mut rng, d, N_CLASSES, N_CLASSES * d);
        Self {
            encoder,
            film,
            head_w,
            head_b: vec![0.0; N_CLASSES],
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn prepare(&self, text: &str) -> E::Input {
        self.encoder.prepare(text)
    }

    /// Encoder output; independent of the controls.
    pub fn encode(&self, input: &E::Input) -> Vec<f64> {
        self.encoder.forward(input).0
    }

    /// Logits from an already encoded vector.
    pub fn logits_from_encoded(&self, h: &[f64], controls: &[f64; 2]) -> Vec<f64> {
        let (y, _) = self.film.forward(h, controls);
        let mut logits = self.head_b.clone();
        matvec_add(&self.head_w, &y, &mut logits);
        logits
    }

    pub fn probs_from_encoded(&self, h: &[f64], controls: &[f64; 2]) -> [f64; 3] {
        to_triple(softmax(&self.logits_from_encoded(h, controls)))
    }

    pub fn logits(&self, input: &E::Input, controls: &[f64; 2]) -> Vec<f64> {
        self.logits_from_encoded(&self.encode(input), controls)
    }

    pub fn forward(&self, input: &E::Input, controls: &[f64; 2]) -> [f64; 3] {
        to_triple(softmax(&self.logits(input, controls)))
    }

    pub fn forward_text(&self, text: &str, controls: &[f64; 2]) -> [f64; 3] {
        self.forward(&self.prepare(text), controls)
    }

    fn trace(&self, input: &E::Input, controls: &[f64; 2]) -> Trace<E::Cache> {
        let (h, enc) = self.encoder.forward(input);
        let (y, film) = self.film.forward(&h, controls);
        let mut logits = self.head_b.clone();
        matvec_add(&self.head_w, &y, &mut logits);
        Trace { h, enc, film, y, probs: softmax(&logits) }
    }

    /// Mean cross-entropy over the batch, without gradients.
    pub fn loss(&self, batch: &[&Example<E::Input>]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|ex| -self.forward(&ex.input, &ex.controls)[ex.label.index()].ln())
            .sum();
        total / batch.len() as f64
    }

    /// Mean cross-entropy and its exact gradient with respect to every
    /// parameter, returned as a model-shaped value.
    pub fn loss_and_gradients(&self, batch: &[&Example<E::Input>]) -> (f64, Self) {
        let mut grads = self.zeros_like();
        let n = batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            let t = self.trace(&ex.input, &ex.controls);
            let y_idx = ex.label.index();
            total -= t.probs[y_idx].ln();
            let d_logits: Vec<f64> = t
                .probs
                .iter()
                .enumerate()
                .map(|(i, p)| (p - if i == y_idx { 1.0 } else { 0.0 }) / n)
                .collect();
            for (g, d) in grads.head_b.iter_mut().zip(&d_logits) {
                *g += d;
            }
            let mut d_y = vec![0.0; t.y.len()];
            matvec_backward(&self.head_w, &t.y, &d_logits, &mut grads.head_w, Some(&mut d_y));
            let d_h = self.film.backward(&t.h, &ex.controls, &t.film, &d_y, &mut grads.film);
            self.encoder.backward(&ex.input, &t.enc, &d_h, &mut grads.encoder);
        }
        (total / n, grads)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            film: self.film.zeros_like(),
            head_w: vec![0.0; self.head_w.len()],
            head_b: vec![0.0; self.head_b.len()],
        }
    }

    pub fn params(&self) -> Vec<Param<'_>> {
        let mut out = self.encoder.params();
        out.extend(self.film.params());
        out.push(Param { name: "head.w", data: &self.head_w, decay: true });
        out.push(Param { name: "head.b", data: &self.head_b, decay: false });
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = self.encoder.params_mut();
        out.extend(self.film.params_mut());
        out.push(ParamMut { name: "head.w", data: &mut self.head_w, decay: true });
        out.push(ParamMut { name: "head.b", data: &mut self.head_b, decay: false });
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    pub fn predict(&self, input: &E::Input, controls: &[f64; 2], rule: &DecisionRule) -> Prediction {
        rule.decide(self.forward(input, controls))
    }
}

fn to_triple(v: Vec<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Turns a probability triple into a label.
///
/// Argmax by default. With a threshold set, a backchannel or turn-claim
/// argmax is only kept when its probability exceeds the threshold; otherwise
/// the decision is stay-silent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionRule {
    pub theta_bc: Option<f64>,
    pub theta_tc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub probs: [f64; 3],
    /// The argmax demoted by a threshold, if any.
    pub suppressed: Option<Label>,
}

impl DecisionRule {
    pub fn argmax(probs: &[f64; 3]) -> Label {
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    pub fn decide(&self, probs: [f64; 3]) -> Prediction {
        let top = Self::argmax(&probs);
        let theta = match top {
            Label::Backchannel => self.theta_bc,
            Label::TurnClaim => self.theta_tc,
            Label::StaySilent => None,
        };
        match theta {
            Some(th) if probs[top.index()] <= th => Prediction {
                label: Label::StaySilent,
                probs,
                suppressed: Some(top),
            },
            _ => Prediction { label: top, probs, suppressed: None },
        }
    }
}
