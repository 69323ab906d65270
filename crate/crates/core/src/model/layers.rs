//! Graph builders for each block of the detector.

use super::config::{Activation, EncoderKind, ModelConfig};
use super::embedding_file::EmbeddingStore;
use super::graph::{Graph, NodeId};
use super::params::{ParamId, Parameters};
use super::tensor::Mat;
use crate::align::ContextWindow;
use crate::error::{Error, Result};
use crate::knowledge::{TokenFeatures, TF_BUCKETS};

pub(crate) struct Nodes {
    pub h_g: Option<NodeId>,
    pub h_d: Option<NodeId>,
    pub a_p: Option<NodeId>,
    pub z: Option<NodeId>,
    pub k: Option<NodeId>,
    pub attention: Vec<NodeId>,
    pub o: NodeId,
    pub a: NodeId,
}

pub(crate) fn pid(params: &Parameters, name: &str) -> Result<ParamId> {
    params.id(name).ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
}

/// Single-layer LSTM over the rows of `x`; returns `steps × n_p` hidden states.
pub(crate) fn lstm(g: &mut Graph, params: &Parameters, prefix: &str, x: NodeId) -> Result<NodeId> {
    let w_ih = g.param(pid(params, &format!("{prefix}.w_ih"))?);
    let w_hh = g.param(pid(params, &format!("{prefix}.w_hh"))?);
    let b = g.param(pid(params, &format!("{prefix}.b"))?);
    let n = g.value(w_hh).rows;
    if g.value(w_ih).rows != g.value(x).cols {
        return Err(Error::Shape(format!("{prefix}: input width {} vs {}", g.value(x).cols, g.value(w_ih).rows)));
    }
    let xw = g.matmul(x, w_ih);
    let proj = g.add_row(xw, b);
    let steps = g.value(x).rows;
    let mut h = g.input(Mat::zeros(1, n));
    let mut c = g.input(Mat::zeros(1, n));
    let mut hs = Vec::with_capacity(steps);
    for t in 0..steps {
        let xt = g.slice_row(proj, t);
        let hw = g.matmul(h, w_hh);
        let z = g.add(xt, hw);
        let zi = g.slice_cols(z, 0, n);
        let zf = g.slice_cols(z, n, n);
        let zg = g.slice_cols(z, 2 * n, n);
        let zo = g.slice_cols(z, 3 * n, n);
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let gg = g.tanh(zg);
        let o = g.sigmoid(zo);
        let fc = g.mul(f, c);
        let ig = g.mul(i, gg);
        c = g.add(fc, ig);
        let tc = g.tanh(c);
        h = g.mul(o, tc);
        hs.push(h);
    }
    Ok(g.concat_rows(&hs))
}

/// `δ(H_d · H_gᵀ)` with hidden states stored one step per row.
pub(crate) fn gaze_text(g: &mut Graph, h_d: NodeId, h_g: NodeId, act: Activation) -> NodeId {
    let s = g.matmul_bt(h_d, h_g);
    match act {
        Activation::Softmax => g.softmax_rows(s),
        Activation::Tanh => g.tanh(s),
    }
}

fn affine(g: &mut Graph, params: &Parameters, x: NodeId, w: &str, b: &str) -> Result<NodeId> {
    let wn = g.param(pid(params, w)?);
    let bn = g.param(pid(params, b)?);
    let xw = g.matmul(x, wn);
    Ok(g.add_row(xw, bn))
}

/// Toy self-attention encoder; returns the output and every head's attention map.
pub(crate) fn toy_encoder(
    g: &mut Graph,
    params: &Parameters,
    cfg: &ModelConfig,
    ids: &[usize],
) -> Result<(NodeId, Vec<NodeId>)> {
    let tok = pid(params, "enc.tok_emb")?;
    let vocab = params.tensor(tok).rows;
    if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
        return Err(Error::OutOfRange { what: "token id", id: bad, size: vocab });
    }
    let pos = pid(params, "enc.pos_emb")?;
    if ids.len() > params.tensor(pos).rows {
        return Err(Error::Shape(format!("{} tokens exceed {} positions", ids.len(), params.tensor(pos).rows)));
    }
    let te = g.gather(tok, ids);
    let positions: Vec<usize> = (0..ids.len()).collect();
    let pe = g.gather(pos, &positions);
    let mut x = g.add(te, pe);
    let dh = cfg.dim / cfg.heads;
    let inv = 1.0 / (dh as f64).sqrt();
    let mut maps = Vec::new();
    for l in 0..cfg.layers {
        let n = |s: &str| format!("enc.l{l}.{s}");
        let q = affine(g, params, x, &n("wq"), &n("bq"))?;
        let k = affine(g, params, x, &n("wk"), &n("bk"))?;
        let v = affine(g, params, x, &n("wv"), &n("bv"))?;
        let mut heads = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let s = g.matmul_bt(qh, kh);
            let s = g.scale(s, inv);
            let p = g.softmax_rows(s);
            maps.push(p);
            heads.push(g.matmul(p, vh));
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads) };
        let attn = affine(g, params, cat, &n("wo"), &n("bo"))?;
        let r1 = g.add(x, attn);
        let (g1, b1) = (g.param(pid(params, &n("ln1_g"))?), g.param(pid(params, &n("ln1_b"))?));
        let x1 = g.layer_norm(r1, g1, b1);
        let hidden = affine(g, params, x1, &n("w1"), &n("b1"))?;
        let hidden = g.gelu(hidden);
        let ff = affine(g, params, hidden, &n("w2"), &n("b2"))?;
        let r2 = g.add(x1, ff);
        let (g2, b2) = (g.param(pid(params, &n("ln2_g"))?), g.param(pid(params, &n("ln2_b"))?));
        x = g.layer_norm(r2, g2, b2);
    }
    Ok((x, maps))
}

pub(crate) fn knowledge(g: &mut Graph, params: &Parameters, feats: &[TokenFeatures]) -> Result<NodeId> {
    let tf: Vec<usize> = feats.iter().map(|f| f.tf_bucket as usize).collect();
    if let Some(&bad) = tf.iter().find(|&&b| b >= TF_BUCKETS) {
        return Err(Error::OutOfRange { what: "frequency bucket", id: bad, size: TF_BUCKETS });
    }
    let pos: Vec<usize> = feats.iter().map(|f| f.pos.id()).collect();
    let ner: Vec<usize> = feats.iter().map(|f| f.ner.id()).collect();
    let e_tf = g.gather(pid(params, "know.tf_emb")?, &tf);
    let e_pos = g.gather(pid(params, "know.pos_emb")?, &pos);
    let e_ner = g.gather(pid(params, "know.ner_emb")?, &ner);
    let cat = g.concat_cols(&[e_tf, e_pos, e_ner]);
    affine(g, params, cat, "know.w", "know.b")
}

pub(crate) fn classifier(g: &mut Graph, params: &Parameters, o: NodeId) -> Result<NodeId> {
    let logit = affine(g, params, o, "cls.w", "cls.b")?;
    Ok(g.sigmoid(logit))
}

fn normalized(points: &[[f64; 2]], cfg: &ModelConfig) -> Result<Mat> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coordinate".into()));
    }
    Ok(Mat::from_vec(
        points.len(),
        2,
        points.iter().flat_map(|p| [p[0] / cfg.screen_width, p[1] / cfg.screen_height]).collect(),
    ))
}

/// Records the full detector for one window on `g`.
pub(crate) fn build(
    g: &mut Graph,
    params: &Parameters,
    cfg: &ModelConfig,
    embeddings: Option<&EmbeddingStore>,
    w: &ContextWindow,
) -> Result<Nodes> {
    w.validate(cfg.n_gaze, cfg.n_txt)?;
    let mut blocks = Vec::with_capacity(3);
    let (mut h_g, mut h_d, mut a_p, mut z, mut k) = (None, None, None, None, None);
    let mut attention = Vec::new();

    if cfg.blocks.gaze {
        let gx = g.input(normalized(&w.gaze_segment, cfg)?);
        let dx = g.input(normalized(&w.token_pos, cfg)?);
        let hg = lstm(g, params, "gaze_lstm", gx)?;
        let hd = lstm(g, params, "pos_lstm", dx)?;
        let ap = gaze_text(g, hd, hg, cfg.attention_activation);
        (h_g, h_d, a_p) = (Some(hg), Some(hd), Some(ap));
        blocks.push(ap);
    }
    if cfg.blocks.context {
        let zn = match cfg.encoder {
            EncoderKind::ToyTransformer => {
                let ids: Vec<usize> = w.token_ids.iter().map(|&i| i as usize).collect();
                let (zn, maps) = toy_encoder(g, params, cfg, &ids)?;
                attention = maps;
                zn
            }
            EncoderKind::EmbeddingFile => {
                let store = embeddings
                    .ok_or_else(|| Error::InvalidArgument("embedding_file encoder without an embedding store".into()))?;
                if store.dim != cfg.dim {
                    return Err(Error::Shape(format!("embedding width {} vs dim {}", store.dim, cfg.dim)));
                }
                g.input(store.lookup(&w.doc_id, &w.token_slice)?)
            }
        };
        z = Some(zn);
        blocks.push(zn);
    }
    if cfg.blocks.knowledge {
        let feats = w
            .features
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("window {}@{} has no knowledge features", w.session_id, w.anchor_word)))?;
        let kn = knowledge(g, params, feats)?;
        k = Some(kn);
        blocks.push(kn);
    }
    let o = if blocks.len() == 1 { blocks[0] } else { g.concat_cols(&blocks) };
    if g.value(o).cols != params.tensor(pid(params, "cls.w")?).rows {
        return Err(Error::Shape(format!(
            "classifier input width {} vs weight rows {}",
            g.value(o).cols,
            params.tensor(pid(params, "cls.w")?).rows
        )));
    }
    let a = classifier(g, params, o)?;
    Ok(Nodes { h_g, h_d, a_p, z, k, attention, o, a })
}
