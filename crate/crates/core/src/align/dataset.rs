use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;

use super::window::{extract_with_times, make_negatives, ContextWindow};
use super::{anticipate_word_times, AlignConfig, ReadingSession};
use crate::corpus::{tokenize, word_token_spans, DocumentLayout, TokenizedDocument, Vocab};
use crate::error::{Error, Result};
use crate::knowledge::{featurize, FrequencyTable, KnowledgeFeatures, Taggers};
use crate::util::{self, fnv1a, rng, sub_seed};

/// A layout together with its tokenization, per-word token spans and
/// (optionally) knowledge features.
#[derive(Debug, Clone)]
pub struct AlignedDocument {
    pub layout: DocumentLayout,
    pub tdoc: TokenizedDocument,
    /// Token range owned by each word, indexed by word ordinal.
    pub spans: Vec<Range<usize>>,
    pub features: Option<KnowledgeFeatures>,
}

impl AlignedDocument {
    pub fn new(layout: DocumentLayout, vocab: &Vocab) -> Self {
        let tdoc = tokenize(&layout, vocab);
        let spans = word_token_spans(&tdoc).into_values().collect();
        AlignedDocument { layout, tdoc, spans, features: None }
    }

    pub fn with_features(mut self, table: &FrequencyTable, taggers: &Taggers) -> Self {
        self.features = Some(featurize(&self.tdoc, &self.layout, table, taggers));
        self
    }
}

fn session_windows(session: &ReadingSession, doc: &AlignedDocument, cfg: &AlignConfig) -> Result<Vec<ContextWindow>> {
    session.validate(doc.layout.len())?;
    let mut rng = rng(sub_seed(cfg.seed, fnv1a(&session.session_id)));
    let times = anticipate_word_times(session.t_start, session.t_end, doc.layout.len())?;

    let positives = session
        .marked_words
        .iter()
        .map(|&w| extract_with_times(session, doc, &times, w, cfg))
        .collect::<Result<Vec<_>>>()?;

    let unmarked: Vec<usize> = (0..doc.layout.len()).filter(|w| !session.marked_words.contains(w)).collect();
    let want = (cfg.unmarked_factor * positives.len()).min(unmarked.len());
    let mut picks: Vec<usize> = sample(&mut rng, unmarked.len(), want).into_iter().map(|i| unmarked[i]).collect();
    picks.sort_unstable();
    let easy = picks
        .into_iter()
        .map(|w| extract_with_times(session, doc, &times, w, cfg))
        .collect::<Result<Vec<_>>>()?;

    let negatives = make_negatives(&positives, session, doc, cfg.neg_ratio, cfg, &mut rng)?;

    let mut out = positives;
    out.extend(easy);
    out.extend(negatives);
    Ok(out)
}

/// Positives for every marked word, `unmarked_factor` times as many windows
/// anchored on unmarked words, and `neg_ratio` negatives per positive, for
/// every session; the result is shuffled with `cfg.seed`.
pub fn build_dataset(
    sessions: &[ReadingSession],
    docs: &BTreeMap<String, AlignedDocument>,
    cfg: &AlignConfig,
) -> Result<Vec<ContextWindow>> {
    let mut all = Vec::new();
    for s in sessions {
        let doc = docs
            .get(&s.doc_id)
            .ok_or_else(|| Error::InvalidArgument(format!("session {} refers to unknown document {}", s.session_id, s.doc_id)))?;
        all.extend(session_windows(s, doc, cfg)?);
    }
    all.shuffle(&mut rng(cfg.seed));
    Ok(all)
}

pub fn write_dataset(path: &Path, windows: &[ContextWindow]) -> Result<()> {
    util::write_jsonl(path, windows)
}

pub fn read_dataset(path: &Path) -> Result<Vec<ContextWindow>> {
    util::read_jsonl(path)
}
