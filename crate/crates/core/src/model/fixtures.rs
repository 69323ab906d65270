//! Random well-formed inputs for shape checks, gradient checks and benches.

use rand::Rng as _;

use super::config::ModelConfig;
use crate::align::ContextWindow;
use crate::knowledge::{NerTag, PosTag, TokenFeatures, TF_BUCKETS};
use crate::util::rng;

/// A window with `len` tokens (two per word), random labels and features.
pub fn random_window(cfg: &ModelConfig, len: usize, seed: u64) -> ContextWindow {
    let mut r = rng(seed);
    let token_words: Vec<usize> = (0..len).map(|i| i / 2).collect();
    let token_pos = token_words
        .iter()
        .map(|&w| [100.0 + 60.0 * (w % 25) as f64, 100.0 + 32.0 * (w / 25) as f64])
        .collect();
    let token_labels: Vec<u8> = (0..len).map(|_| u8::from(r.random_bool(0.3))).collect();
    let gaze_segment = (0..cfg.n_gaze).map(|_| [r.random_range(0.0..1920.0), r.random_range(0.0..1080.0)]).collect();
    let features = (0..len)
        .map(|_| TokenFeatures {
            tf_bucket: r.random_range(0..TF_BUCKETS) as u8,
            pos: PosTag::ALL[r.random_range(0..PosTag::ALL.len())],
            ner: NerTag::ALL[r.random_range(0..NerTag::ALL.len())],
        })
        .collect();
    ContextWindow {
        session_id: format!("s{seed}"),
        user_id: "u".into(),
        doc_id: "d".into(),
        anchor_word: 0,
        is_negative: false,
        token_slice: (0..len).collect(),
        token_ids: (0..len).map(|_| r.random_range(0..cfg.vocab_size) as u32).collect(),
        token_words,
        token_pos,
        token_labels,
        gaze_segment,
        features: Some(features),
    }
}
