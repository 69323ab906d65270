use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{EncoderKind, ModelConfig};
use super::tensor::Mat;
use crate::knowledge::{NerTag, PosTag, TF_BUCKETS};
use crate::util::rng;

pub type ParamId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Recurrent position/gaze encoders, updated with plain gradient descent.
    Lstm,
    /// Everything else, updated with adaptive moments.
    Encoder,
}

/// Named learnable tensors of the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    names: Vec<String>,
    tensors: Vec<Mat>,
    index: BTreeMap<String, ParamId>,
}

impl Parameters {
    pub fn from_named(named: Vec<(String, Mat)>) -> Self {
        let mut p = Parameters { names: Vec::new(), tensors: Vec::new(), index: BTreeMap::new() };
        for (name, m) in named {
            p.index.insert(name.clone(), p.names.len());
            p.names.push(name);
            p.tensors.push(m);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn tensor(&self, id: ParamId) -> &Mat {
        &self.tensors[id]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id]
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.id(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.id(name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn group(&self, id: ParamId) -> ParamGroup {
        let n = &self.names[id];
        if n.starts_with("gaze_lstm.") || n.starts_with("pos_lstm.") {
            ParamGroup::Lstm
        } else {
            ParamGroup::Encoder
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients { tensors: self.tensors.iter().map(|t| Mat::zeros(t.rows, t.cols)).collect() }
    }

    /// Randomly initialised parameters for `cfg`, deterministic in `cfg.seed`.
    pub fn init(cfg: &ModelConfig) -> Parameters {
        let mut rng = rng(cfg.seed);
        let mut named: Vec<(String, Mat)> = Vec::new();
        let uniform = |rows: usize, cols: usize, bound: f64, rng: &mut crate::util::Rng| {
            Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect())
        };
        let xavier = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();

        if cfg.blocks.gaze {
            let n = cfg.n_p;
            let k = 1.0 / (n as f64).sqrt();
            for prefix in ["gaze_lstm", "pos_lstm"] {
                let w_ih = uniform(2, 4 * n, k, &mut rng);
                let w_hh = uniform(n, 4 * n, k, &mut rng);
                let mut b = uniform(1, 4 * n, k, &mut rng);
                // gate order i, f, g, o; open the forget gate at start
                b.data[n..2 * n].fill(1.0);
                named.push((format!("{prefix}.w_ih"), w_ih));
                named.push((format!("{prefix}.w_hh"), w_hh));
                named.push((format!("{prefix}.b"), b));
            }
        }

        if cfg.blocks.context && cfg.encoder == EncoderKind::ToyTransformer {
            let normal = Normal::new(0.0, 0.1).expect("valid normal");
            let emb = |rows: usize, cols: usize, rng: &mut crate::util::Rng| {
                Mat::from_vec(rows, cols, (0..rows * cols).map(|_| normal.sample(rng)).collect())
            };
            named.push(("enc.tok_emb".into(), emb(cfg.vocab_size, cfg.dim, &mut rng)));
            named.push(("enc.pos_emb".into(), emb(cfg.n_txt, cfg.dim, &mut rng)));
            let d = cfg.dim;
            for l in 0..cfg.layers {
                for w in ["wq", "wk", "wv", "wo"] {
                    named.push((format!("enc.l{l}.{w}"), uniform(d, d, xavier(d, d), &mut rng)));
                    named.push((format!("enc.l{l}.b{}", &w[1..]), Mat::zeros(1, d)));
                }
                named.push((format!("enc.l{l}.ln1_g"), Mat::filled(1, d, 1.0)));
                named.push((format!("enc.l{l}.ln1_b"), Mat::zeros(1, d)));
                named.push((format!("enc.l{l}.w1"), uniform(d, cfg.ffn_dim, xavier(d, cfg.ffn_dim), &mut rng)));
                named.push((format!("enc.l{l}.b1"), Mat::zeros(1, cfg.ffn_dim)));
                named.push((format!("enc.l{l}.w2"), uniform(cfg.ffn_dim, d, xavier(cfg.ffn_dim, d), &mut rng)));
                named.push((format!("enc.l{l}.b2"), Mat::zeros(1, d)));
                named.push((format!("enc.l{l}.ln2_g"), Mat::filled(1, d, 1.0)));
                named.push((format!("enc.l{l}.ln2_b"), Mat::zeros(1, d)));
            }
        }

        if cfg.blocks.knowledge {
            let e = cfg.knowledge_embed_dim;
            let b = 1.0 / (e as f64).sqrt();
            named.push(("know.tf_emb".into(), uniform(TF_BUCKETS, e, b, &mut rng)));
            named.push(("know.pos_emb".into(), uniform(PosTag::ALL.len(), e, b, &mut rng)));
            named.push(("know.ner_emb".into(), uniform(NerTag::ALL.len(), e, b, &mut rng)));
            named.push(("know.w".into(), uniform(3 * e, cfg.n_k, xavier(3 * e, cfg.n_k), &mut rng)));
            named.push(("know.b".into(), Mat::zeros(1, cfg.n_k)));
        }

        let width = cfg.classifier_width();
        named.push(("cls.w".into(), uniform(width, 1, xavier(width, 1), &mut rng)));
        named.push(("cls.b".into(), Mat::zeros(1, 1)));
        Parameters::from_named(named)
    }
}

/// Dense gradient buffers shaped like [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Mat>,
}

impl Gradients {
    pub fn tensor(&self, id: ParamId) -> &Mat {
        &self.tensors[id]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id]
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }
}
