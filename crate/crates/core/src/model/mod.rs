//! The unknown-word detector.
//!
//! Each [`ContextWindow`] is scored by three feature blocks concatenated per
//! token: gaze-text attention from two recurrent encoders (gaze samples and
//! word-box centers), a context encoder over the token slice, and a knowledge
//! embedding of frequency/POS/NER features. A shared affine map and sigmoid
//! turns every token row into a probability of being unknown.
//!
//! Hidden states are computed on the window's actual token count `L ≤ n_txt`;
//! no padding rows are materialised.

mod checkpoint;
mod config;
mod embedding_file;
pub mod fixtures;
mod graph;
mod layers;
mod optim;
mod params;
mod tensor;
mod train;

use std::collections::BTreeSet;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use config::{Activation, EncoderKind, FeatureBlocks, LrSchedule, ModelConfig};
pub use embedding_file::EmbeddingStore;
pub use graph::{bce_sum as bce_loss, softmax_in_place, Graph, NodeId, LOG_CLAMP};
pub use optim::{Adam, Optimizer};
pub use params::{Gradients, ParamGroup, ParamId, Parameters};
pub use tensor::Mat;
pub use train::{train, EpochStats, TrainOptions, TrainOutput};

use crate::align::ContextWindow;
use crate::error::{Error, Result};

/// Intermediate values of one forward pass, in the conventional orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `n_p × n_gaze`
    pub h_g: Option<Mat>,
    /// `n_p × L`
    pub h_d: Option<Mat>,
    /// `L × n_gaze`
    pub a_p: Option<Mat>,
    /// `L × dim`
    pub z: Option<Mat>,
    /// `L × n_k`
    pub k: Option<Mat>,
    /// `L × width`
    pub o: Mat,
    pub a: Vec<f64>,
    /// One `L × L` map per layer and head of the toy encoder.
    pub attention: Vec<Mat>,
}

/// Configuration, weights and (optionally) precomputed context vectors.
#[derive(Debug, Clone)]
pub struct Detector {
    pub config: ModelConfig,
    pub params: Parameters,
    pub embeddings: Option<EmbeddingStore>,
}

impl Detector {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Detector { config, params, embeddings: None })
    }

    pub fn with_params(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let expected = Parameters::init(&config);
        for (name, t) in expected.iter() {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => return Err(Error::Shape(format!("{name}: {:?} vs expected {:?}", p.shape(), t.shape()))),
                None => return Err(Error::Shape(format!("missing parameter {name}"))),
            }
        }
        if params.len() != expected.len() {
            return Err(Error::Shape(format!("{} tensors, expected {}", params.len(), expected.len())));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(Detector { config, params, embeddings: None })
    }

    pub fn forward(&self, w: &ContextWindow) -> Result<ForwardTrace> {
        let mut g = Graph::new(&self.params);
        let n = layers::build(&mut g, &self.params, &self.config, self.embeddings.as_ref(), w)?;
        let get = |id: Option<NodeId>| id.map(|i| g.value(i).clone());
        let a = g.value(n.a).data.clone();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("activations".into()));
        }
        Ok(ForwardTrace {
            h_g: get(n.h_g).map(|m| m.transpose()),
            h_d: get(n.h_d).map(|m| m.transpose()),
            a_p: get(n.a_p),
            z: get(n.z),
            k: get(n.k),
            o: g.value(n.o).clone(),
            a,
            attention: n.attention.iter().map(|&i| g.value(i).clone()).collect(),
        })
    }

    /// Per-token probabilities only.
    pub fn scores(&self, w: &ContextWindow) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let n = layers::build(&mut g, &self.params, &self.config, self.embeddings.as_ref(), w)?;
        Ok(g.value(n.a).data.clone())
    }

    /// Summed token loss of one window.
    pub fn loss(&self, w: &ContextWindow) -> Result<f64> {
        let a = self.scores(w)?;
        let labels: Vec<f64> = w.token_labels.iter().map(|&l| f64::from(l)).collect();
        Ok(bce_loss(&a, &labels))
    }

    /// Mean batch loss; adds its gradient into `grads`.
    pub fn accumulate_grad(&self, batch: &[&ContextWindow], grads: &mut Gradients) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for w in batch {
            let mut g = Graph::new(&self.params);
            let n = layers::build(&mut g, &self.params, &self.config, self.embeddings.as_ref(), w)?;
            let labels: Vec<f64> = w.token_labels.iter().map(|&l| f64::from(l)).collect();
            let loss = g.bce_sum(n.a, &labels);
            let lv = g.value(loss).data[0];
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("loss on window {}@{}", w.session_id, w.anchor_word)));
            }
            total += lv;
            g.backward(loss, scale, grads);
        }
        Ok(total * scale)
    }

    /// Gradient of the mean batch loss for every parameter tensor.
    pub fn grad(&self, batch: &[&ContextWindow]) -> Result<(f64, Gradients)> {
        let mut grads = self.params.zeros_like();
        let loss = self.accumulate_grad(batch, &mut grads)?;
        Ok((loss, grads))
    }

    /// Word ordinals with at least one token scored at or above the threshold.
    pub fn predict(&self, w: &ContextWindow) -> Result<BTreeSet<usize>> {
        Ok(flag_words(&self.scores(w)?, &w.token_words, self.config.threshold))
    }
}

/// Any-token rule from token scores to flagged word ordinals.
pub fn flag_words(scores: &[f64], token_words: &[usize], threshold: f64) -> BTreeSet<usize> {
    scores.iter().zip(token_words).filter(|(&a, _)| a >= threshold).map(|(_, &w)| w).collect()
}

/// Runs a standalone recurrent encoder; `x` holds one input step per row and
/// the result is `n_p × steps`.
pub fn encode_sequence(params: &Parameters, prefix: &str, x: &Mat) -> Result<Mat> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("{prefix} input")));
    }
    let mut g = Graph::new(params);
    let xi = g.input(x.clone());
    let h = layers::lstm(&mut g, params, prefix, xi)?;
    Ok(g.value(h).transpose())
}

/// `δ(H_dᵀ · H_g)` for `H_d: n_p × L` and `H_g: n_p × n_gaze`.
pub fn gaze_text_attention(h_d: &Mat, h_g: &Mat, act: Activation) -> Result<Mat> {
    if h_d.rows != h_g.rows {
        return Err(Error::Shape(format!("inner dims {} vs {}", h_d.rows, h_g.rows)));
    }
    let mut s = h_d.matmul_at(h_g);
    match act {
        Activation::Softmax => {
            for i in 0..s.rows {
                softmax_in_place(s.row_mut(i));
            }
        }
        Activation::Tanh => s = s.map(f64::tanh),
    }
    Ok(s)
}

/// Sigmoid of the classifier's affine map for each row of `o`.
pub fn classify(params: &Parameters, o: &Mat) -> Result<Vec<f64>> {
    let w = params.get("cls.w").ok_or_else(|| Error::Shape("missing cls.w".into()))?;
    if w.rows != o.cols {
        return Err(Error::Shape(format!("feature width {} vs classifier {}", o.cols, w.rows)));
    }
    let mut g = Graph::new(params);
    let oi = g.input(o.clone());
    let a = layers::classifier(&mut g, params, oi)?;
    Ok(g.value(a).data.clone())
}
