use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, FilmClassifier, TextEncoder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 0.01,
            warmup_ratio: 0.1,
            clip_norm: 1.0,
            batch_size: 128,
            epochs: 3,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid("train config", m));
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 || !(0.0..=1.0).contains(&self.warmup_ratio) {
            return bad("weight_decay must be >= 0 and warmup_ratio in [0, 1]");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("clip_norm, batch_size and epochs must be positive");
        }
        Ok(())
    }
}

/// Linear warmup then cosine decay to zero, as a multiplier of the base rate.
pub fn lr_multiplier(step: usize, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return step as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1);
    let progress = (step - warmup) as f64 / span as f64;
    0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos())
}

/// Adam with decoupled weight decay; parameters flagged `decay = false` are
/// not decayed.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new<E: TextEncoder>(model: &FilmClassifier<E>, weight_decay: f64) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|p| p.data.len()).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn update<E: TextEncoder>(&mut self, model: &mut FilmClassifier<E>, grads: &FilmClassifier<E>, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads.params())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let decay = if p.decay { wd } else { 0.0 };
            for (((w, &g), m), v) in p.data.iter_mut().zip(g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                *w -= lr * (update + decay * *w);
            }
        }
    }
}

fn clip_global_norm<E: TextEncoder>(grads: &mut FilmClassifier<E>, max_norm: f64) -> f64 {
    let norm = grads
        .params()
        .iter()
        .flat_map(|p| p.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    let coef = max_norm / (norm + 1e-6);
    if coef < 1.0 {
        for p in grads.params_mut() {
            p.data.iter_mut().for_each(|g| *g *= coef);
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<E: TextEncoder> {
    /// Parameters after the epoch with the lowest validation loss, or after
    /// the last epoch when there is no validation set.
    pub model: FilmClassifier<E>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Mini-batch training with AdamW, warmup plus cosine schedule and global
/// gradient clipping. Fully deterministic for a given seed.
pub fn train<E: TextEncoder>(
    model: FilmClassifier<E>,
    train_set: &[Example<E::Input>],
    val_set: &[Example<E::Input>],
    config: &TrainConfig,
) -> Result<TrainOutcome<E>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set", "empty"));
    }
    let mut model = model;
    let mut opt = AdamW::new(&model, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps_per_epoch = train_set.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let warmup = (config.warmup_ratio * total as f64).ceil() as usize;
    let val_refs: Vec<&Example<E::Input>> = val_set.iter().collect();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, FilmClassifier<E>)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example<E::Input>> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grads) = model.loss_and_gradients(&batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            clip_global_norm(&mut grads, config.clip_norm);
            lr = config.learning_rate * lr_multiplier(step, warmup, total);
            opt.update(&mut model, &grads, lr);
            loss_sum += loss * batch.len() as f64;
            step += 1;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = (!val_refs.is_empty()).then(|| model.loss(&val_refs));
        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(Error::Diverged { epoch, step, loss: v });
            }
        }
        log::info!("epoch {epoch}: train loss {train_loss:.4}, val loss {val_loss:?}, lr {lr:.2e}");
        history.push(EpochRecord { epoch, train_loss, val_loss, learning_rate: lr });

        let score = val_loss.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b || val_loss.is_none()) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, best_epoch, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderConfig, ModelConfig};
    use crate::Label;

    fn tiny() -> FilmClassifier {
        FilmClassifier::new(&ModelConfig {
            encoder: EncoderConfig { buckets: 64, embed_dim: 8, hidden_dim: 8, hash_seed: 3 },
            film_hidden: 4,
            init_seed: 11,
        })
    }

    fn data(m: &FilmClassifier) -> Vec<Example<crate::model::Features>> {
        let texts = [("you know what", Label::TurnClaim), ("mm right so", Label::Backchannel), ("and then", Label::StaySilent)];
        (0..30)
            .map(|i| {
                let (t, label) = texts[i % 3];
                Example { input: m.prepare(t), controls: [(i % 5) as f64 / 4.0, 0.5], label }
            })
            .collect()
    }

    #[test]
    fn schedule_shape() {
        assert_eq!(lr_multiplier(0, 10, 100), 0.0);
        assert_eq!(lr_multiplier(5, 10, 100), 0.5);
        assert_eq!(lr_multiplier(10, 10, 100), 1.0);
        assert!((lr_multiplier(55, 10, 100) - 0.5).abs() < 1e-12);
        assert!(lr_multiplier(99, 10, 100) < 0.01);
        assert_eq!(lr_multiplier(0, 0, 10), 1.0);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let m = tiny();
        let d = data(&m);
        let cfg = TrainConfig { learning_rate: 0.0, batch_size: 8, epochs: 3, ..Default::default() };
        let out = train(m.clone(), &d, &d, &cfg).unwrap();
        assert_eq!(out.model, m);
        let v: Vec<f64> = out.history.iter().map(|h| h.val_loss.unwrap()).collect();
        assert!(v.iter().all(|&x| x == v[0]));
    }

    #[test]
    fn same_seed_same_parameters_and_loss_goes_down() {
        let m = tiny();
        let d = data(&m);
        let cfg = TrainConfig { learning_rate: 0.05, batch_size: 8, epochs: 20, ..Default::default() };
        let a = train(m.clone(), &d, &d, &cfg).unwrap();
        let b = train(m.clone(), &d, &d, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        let first = a.history[0].val_loss.unwrap();
        let best = a.history[a.best_epoch - 1].val_loss.unwrap();
        assert!(best < first * 0.5, "{first} -> {best}");
    }

    #[test]
    fn nan_loss_aborts() {
        let mut m = tiny();
        m.head_b[0] = f64::NAN;
        let d = data(&m);
        let r = train(m, &d, &[], &TrainConfig::default());
        assert!(matches!(r, Err(Error::Diverged { epoch: 1, step: 0, .. })));
    }
}
