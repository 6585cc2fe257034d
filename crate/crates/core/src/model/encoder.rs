use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{matvec_add, matvec_backward, xavier, Param, ParamMut};
use crate::corpus::tokenize;

/// Maps window text to a fixed-size hidden vector.
///
/// `prepare` does the text-only work once so training epochs and dial sweeps
/// can reuse it.
pub trait TextEncoder: Clone + Send + Sync + Serialize + DeserializeOwned {
    type Input: Clone + Send + Sync;
    type Cache;

    fn dim(&self) -> usize;
    fn prepare(&self, text: &str) -> Self::Input;
    fn forward(&self, input: &Self::Input) -> (Vec<f64>, Self::Cache);
    /// Accumulate parameter gradients into `grads` given `dL/dh`.
    fn backward(&self, input: &Self::Input, cache: &Self::Cache, d_h: &[f64], grads: &mut Self);
    fn zeros_like(&self) -> Self;
    fn params(&self) -> Vec<Param<'_>>;
    fn params_mut(&mut self) -> Vec<ParamMut<'_>>;
}

/// 64-bit FNV-1a over a seed, a salt byte and the given parts.
pub fn fnv1a(seed: u64, salt: u8, parts: &[&str]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    eat(salt);
    for p in parts {
        p.bytes().for_each(&mut eat);
        eat(0xff);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub buckets: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            buckets: 8192,
            embed_dim: 64,
            hidden_dim: 128,
            hash_seed: 0x5eed,
        }
    }
}

const SALT_UNIGRAM: u8 = 1;
const SALT_BIGRAM: u8 = 2;
const SALT_LAST_UNIGRAM: u8 = 3;
const SALT_LAST_BIGRAM: u8 = 4;

/// Hashed features of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    /// Bag of unigram and bigram buckets with mean-pooling weights.
    pub bag: Vec<(usize, f64)>,
    /// Buckets of the last unigram and last bigram.
    pub tail: [Option<usize>; 2],
}

/// Hashed n-gram embedding encoder.
///
/// The input vector concatenates the mean embedding of all unigrams and
/// bigrams with the embeddings of the last unigram and last bigram, so the
/// end of the window is visible. `h = tanh(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEncoder {
    pub config: EncoderConfig,
    /// `buckets × embed_dim`, row-major.
    pub embedding: Vec<f64>,
    /// `hidden_dim × 3·embed_dim`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

pub struct EncoderCache {
    x: Vec<f64>,
    h: Vec<f64>,
}

impl ReferenceEncoder {
    pub fn new(config: EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = config.embed_dim;
        let embedding = (0..config.buckets * m)
            .map(|_| rand::Rng::random_range(&mut rng, -0.5..0.5))
            .collect();
        let w = xavier(&mut rng, 3 * m, config.hidden_dim, config.hidden_dim * 3 * m);
        Self {
            config,
            embedding,
            w,
            b: vec![0.0; config.hidden_dim],
        }
    }

    pub fn featurize(&self, text: &str) -> Features {
        let tokens = tokenize(text);
        let seed = self.config.hash_seed;
        let bucket = |salt, parts: &[&str]| (fnv1a(seed, salt, parts) % self.config.buckets as u64) as usize;

        let mut ids: Vec<usize> = tokens.iter().map(|t| bucket(SALT_UNIGRAM, &[t])).collect();
        ids.extend(tokens.windows(2).map(|p| bucket(SALT_BIGRAM, &[&p[0], &p[1]])));
        let n = ids.len() as f64;
        ids.sort_unstable();
        let mut bag: Vec<(usize, f64)> = Vec::new();
        for id in ids {
            match bag.last_mut() {
                Some((last, w)) if *last == id => *w += 1.0 / n,
                _ => bag.push((id, 1.0 / n)),
            }
        }
        let k = tokens.len();
        let tail = [
            tokens.last().map(|t| bucket(SALT_LAST_UNIGRAM, &[t])),
            (k >= 2).then(|| bucket(SALT_LAST_BIGRAM, &[&tokens[k - 2], &tokens[k - 1]])),
        ];
        Features { bag, tail }
    }

    fn row(&self, id: usize) -> &[f64] {
        let m = self.config.embed_dim;
        &self.embedding[id * m..(id + 1) * m]
    }
}

impl TextEncoder for ReferenceEncoder {
    type Input = Features;
    type Cache = EncoderCache;

    fn dim(&self) -> usize {
        self.config.hidden_dim
    }

    fn prepare(&self, text: &str) -> Features {
        self.featurize(text)
    }

    fn forward(&self, f: &Features) -> (Vec<f64>, EncoderCache) {
        let m = self.config.embed_dim;
        let mut x = vec![0.0; 3 * m];
        for &(id, wt) in &f.bag {
            for (xi, e) in x[..m].iter_mut().zip(self.row(id)) {
                *xi += wt * e;
            }
        }
        for (slot, id) in f.tail.iter().enumerate() {
            if let Some(id) = *id {
                x[(slot + 1) * m..(slot + 2) * m].copy_from_slice(self.row(id));
            }
        }
        let mut h = self.b.clone();
        matvec_add(&self.w, &x, &mut h);
        h.iter_mut().for_each(|v| *v = v.tanh());
        (h.clone(), EncoderCache { x, h })
    }

    fn backward(&self, f: &Features, cache: &EncoderCache, d_h: &[f64], grads: &mut Self) {
        let m = self.config.embed_dim;
        let d_pre: Vec<f64> = d_h.iter().zip(&cache.h).map(|(g, h)| g * (1.0 - h * h)).collect();
        for (db, g) in grads.b.iter_mut().zip(&d_pre) {
            *db += g;
        }
        let mut dx = vec![0.0; 3 * m];
        matvec_backward(&self.w, &cache.x, &d_pre, &mut grads.w, Some(&mut dx));
        for &(id, wt) in &f.bag {
            for (de, g) in grads.embedding[id * m..(id + 1) * m].iter_mut().zip(&dx[..m]) {
                *de += wt * g;
            }
        }
        for (slot, id) in f.tail.iter().enumerate() {
            if let Some(id) = *id {
                let src = &dx[(slot + 1) * m..(slot + 2) * m];
                for (de, g) in grads.embedding[id * m..(id + 1) * m].iter_mut().zip(src) {
                    *de += g;
                }
            }
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            embedding: vec![0.0; self.embedding.len()],
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn params(&self) -> Vec<Param<'_>> {
        vec![
            Param { name: "encoder.embedding", data: &self.embedding, decay: true },
            Param { name: "encoder.w", data: &self.w, decay: true },
            Param { name: "encoder.b", data: &self.b, decay: false },
        ]
    }

    fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        vec![
            ParamMut { name: "encoder.embedding", data: &mut self.embedding, decay: true },
            ParamMut { name: "encoder.w", data: &mut self.w, decay: true },
            ParamMut { name: "encoder.b", data: &mut self.b, decay: false },
        ]
    }
}
