use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, FilmClassifier, ModelConfig, TrainConfig};
use crate::control::QuantileMap;
use crate::{Error, Label, Result};

pub const CHECKPOINT_FORMAT: &str = "backtalk-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to serve a trained model: parameters, the quantile map
/// that defines the dial scale, and the configuration that produced them.
///
/// Stored as JSON. Equal seeds give byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub class_order: [Label; 3],
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub quantile_map: Option<QuantileMap>,
    pub model: FilmClassifier,
}

impl Checkpoint {
    pub fn new(
        model: FilmClassifier,
        model_config: ModelConfig,
        train_config: TrainConfig,
        quantile_map: Option<QuantileMap>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            class_order: Label::ALL,
            model_config,
            train_config,
            best_epoch: 0,
            history: Vec::new(),
            quantile_map,
            model,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck: Self = serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.check()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {:?} version {}",
                self.format, self.version
            )));
        }
        if self.class_order != Label::ALL {
            return Err(Error::Checkpoint("unexpected class order".into()));
        }
        let enc = &self.model.encoder;
        let c = enc.config;
        let d = c.hidden_dim;
        let film = &self.model.film;
        let sizes_ok = enc.embedding.len() == c.buckets * c.embed_dim
            && enc.w.len() == d * 3 * c.embed_dim
            && enc.b.len() == d
            && film.dim == d
            && film.gamma_w1.len() == 2 * film.hidden
            && film.beta_w1.len() == 2 * film.hidden
            && film.gamma_w2.len() == d * film.hidden
            && film.beta_w2.len() == d * film.hidden
            && film.gamma_b2.len() == d
            && film.beta_b2.len() == d
            && self.model.head_w.len() == 3 * d
            && self.model.head_b.len() == 3;
        if !sizes_ok {
            return Err(Error::Checkpoint("tensor shapes do not match the configuration".into()));
        }
        Ok(())
    }
}
