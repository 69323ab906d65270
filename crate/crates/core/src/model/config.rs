use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Built-in self-attention encoder trained end to end.
    ToyTransformer,
    /// Per-token vectors read from a precomputed embedding file.
    EmbeddingFile,
}

/// Activation applied to the gaze-text score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Row-wise softmax over the gaze axis.
    Softmax,
    Tanh,
}

/// Learning-rate multiplier over training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Falls linearly from 1 at the first step to 0 after the last.
    Linear,
}

impl LrSchedule {
    /// Multiplier for step `step` (0-based) of `total`.
    pub fn scale(self, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Linear => 1.0 - step as f64 / total.max(1) as f64,
        }
    }
}

/// Which feature blocks feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlocks {
    pub gaze: bool,
    pub context: bool,
    pub knowledge: bool,
}

impl Default for FeatureBlocks {
    fn default() -> Self {
        FeatureBlocks { gaze: true, context: true, knowledge: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Recurrent encoder output width.
    pub n_p: usize,
    /// Knowledge matrix width.
    pub n_k: usize,
    /// Width of each of the three feature embeddings before projection.
    pub knowledge_embed_dim: usize,
    /// Context encoder hidden width.
    pub dim: usize,
    pub n_gaze: usize,
    pub n_txt: usize,
    pub vocab_size: usize,
    pub encoder: EncoderKind,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub attention_activation: Activation,
    pub threshold: f64,
    /// Adaptive-moment rate for the context encoder, knowledge and classifier.
    pub lr_encoder: f64,
    /// Plain gradient-descent rate for both recurrent encoders.
    pub lr_lstm: f64,
    pub lr_schedule: LrSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub screen_width: f64,
    pub screen_height: f64,
    pub blocks: FeatureBlocks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_file: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_p: 16,
            n_k: 32,
            knowledge_embed_dim: 8,
            dim: 64,
            n_gaze: 20,
            n_txt: 64,
            vocab_size: crate::corpus::Vocab::default_vocab().size(),
            encoder: EncoderKind::ToyTransformer,
            layers: 2,
            heads: 2,
            ffn_dim: 128,
            attention_activation: Activation::Softmax,
            threshold: 0.5,
            lr_encoder: 8e-5,
            lr_lstm: 0.1,
            lr_schedule: LrSchedule::Constant,
            epochs: 5,
            batch_size: 16,
            seed: 0,
            screen_width: 1920.0,
            screen_height: 1080.0,
            blocks: FeatureBlocks::default(),
            embedding_file: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_p", self.n_p),
            ("n_k", self.n_k),
            ("knowledge_embed_dim", self.knowledge_embed_dim),
            ("dim", self.dim),
            ("n_gaze", self.n_gaze),
            ("n_txt", self.n_txt),
            ("vocab_size", self.vocab_size),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!("dim {} not divisible by {} heads", self.dim, self.heads)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(self.lr_encoder >= 0.0 && self.lr_lstm >= 0.0) {
            return Err(Error::InvalidArgument("learning rates must be >= 0".into()));
        }
        if !(self.screen_width > 0.0 && self.screen_height > 0.0) {
            return Err(Error::InvalidArgument("screen size must be positive".into()));
        }
        if !(self.blocks.gaze || self.blocks.context || self.blocks.knowledge) {
            return Err(Error::InvalidArgument("at least one feature block must stay enabled".into()));
        }
        Ok(())
    }

    /// Per-token width of the classifier input `[A_p; Z; K]`.
    pub fn classifier_width(&self) -> usize {
        let b = self.blocks;
        usize::from(b.gaze) * self.n_gaze + usize::from(b.context) * self.dim + usize::from(b.knowledge) * self.n_k
    }

    /// Short stable hash of the configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_width() {
        let c = ModelConfig::default();
        assert_eq!((c.epochs, c.lr_encoder, c.lr_lstm), (5, 8e-5, 0.1));
        assert_eq!(c.threshold, 0.5);
        c.validate().unwrap();
        let c = ModelConfig { n_p: 16, n_k: 32, dim: 64, n_gaze: 20, n_txt: 64, ..c };
        assert_eq!(c.classifier_width(), 116);
    }

    #[test]
    fn invalid_configs() {
        let base = ModelConfig::default();
        assert!(ModelConfig { n_p: 0, ..base.clone() }.validate().is_err());
        assert!(ModelConfig { threshold: 1.0, ..base.clone() }.validate().is_err());
        assert!(ModelConfig { dim: 63, ..base.clone() }.validate().is_err());
        let none = FeatureBlocks { gaze: false, context: false, knowledge: false };
        assert!(ModelConfig { blocks: none, ..base }.validate().is_err());
    }

    #[test]
    fn linear_schedule_falls_to_zero() {
        assert_eq!(LrSchedule::Constant.scale(7, 10), 1.0);
        assert_eq!(LrSchedule::Linear.scale(0, 10), 1.0);
        assert!((LrSchedule::Linear.scale(5, 10) - 0.5).abs() < 1e-12);
        assert!((LrSchedule::Linear.scale(9, 10) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ModelConfig::default();
        let b = ModelConfig { n_k: 16, ..a.clone() };
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
