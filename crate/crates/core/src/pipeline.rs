//! End-to-end glue: featurizing documents, building training windows from a
//! synthetic corpus, and scoring a finished reading session.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::align::{build_dataset, extract_context, AlignConfig, AlignedDocument, ContextWindow, ReadingSession};
use crate::corpus::{DocumentLayout, Vocab};
use crate::error::{Error, Result};
use crate::gaze::{condition, GazeTrace};
use crate::knowledge::{FrequencyTable, Taggers};
use crate::model::{Checkpoint, Detector, ModelConfig};
use crate::synth::{reading_session, CorpusDir, SynthCorpus};

/// Vocabulary, frequency table and taggers applied to every document.
pub struct Featurizer {
    pub vocab: Vocab,
    pub table: FrequencyTable,
    pub taggers: Taggers,
}

impl Featurizer {
    pub fn new(vocab: Vocab, table: FrequencyTable) -> Self {
        Featurizer { vocab, table, taggers: Taggers::default() }
    }

    pub fn align(&self, layout: DocumentLayout) -> AlignedDocument {
        AlignedDocument::new(layout, &self.vocab).with_features(&self.table, &self.taggers)
    }
}

/// Alignment settings matching the model's gaze and text lengths.
pub fn align_config_for(model: &ModelConfig, seed: u64) -> AlignConfig {
    AlignConfig { n_gaze: model.n_gaze, n_txt: model.n_txt, seed, ..AlignConfig::default() }
}

/// Featurized documents and conditioned sessions of a corpus.
pub struct PreparedCorpus {
    pub docs: BTreeMap<String, AlignedDocument>,
    pub sessions: Vec<ReadingSession>,
    pub table: FrequencyTable,
}

impl PreparedCorpus {
    /// Featurizes `docs` with a frequency table counted over all of them.
    pub fn new(docs: Vec<DocumentLayout>, sessions: Vec<ReadingSession>, vocab: &Vocab) -> Result<Self> {
        let table = FrequencyTable::from_docs(&docs)?;
        let feat = Featurizer::new(vocab.clone(), table);
        let docs = docs.into_iter().map(|d| (d.doc_id.clone(), feat.align(d))).collect();
        Ok(PreparedCorpus { docs, sessions, table: feat.table })
    }

    pub fn windows(&self, cfg: &AlignConfig) -> Result<Vec<ContextWindow>> {
        build_dataset(&self.sessions, &self.docs, cfg)
    }
}

pub fn prepare_corpus(corpus: &SynthCorpus, vocab: &Vocab, cfg: &AlignConfig) -> Result<PreparedCorpus> {
    let sessions = corpus.sessions.iter().map(|s| s.reading_session(cfg)).collect::<Result<Vec<_>>>()?;
    PreparedCorpus::new(corpus.docs.clone(), sessions, vocab)
}

/// Same as [`prepare_corpus`] for a corpus written to disk.
pub fn prepare_corpus_dir(dir: &CorpusDir, vocab: &Vocab, cfg: &AlignConfig) -> Result<PreparedCorpus> {
    let sessions = dir
        .sessions
        .iter()
        .map(|(m, raw)| reading_session(&m.session_id, &m.user_id, &m.doc_id, raw, m.marked_words.clone(), cfg))
        .collect::<Result<Vec<_>>>()?;
    PreparedCorpus::new(dir.docs.values().cloned().collect(), sessions, vocab)
}

/// Copies each window's token features from its featurized document.
pub fn attach_features(windows: &mut [ContextWindow], docs: &BTreeMap<String, AlignedDocument>) -> Result<()> {
    for w in windows {
        let feats = docs
            .get(&w.doc_id)
            .and_then(|d| d.features.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("no featurized document {}", w.doc_id)))?;
        let rows = w
            .token_slice
            .iter()
            .map(|&i| feats.tokens.get(i).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidArgument(format!("window {}@{} runs past document {}", w.session_id, w.anchor_word, w.doc_id)))?;
        w.features = Some(rows);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: usize,
    pub text: String,
    pub score: f64,
}

/// Scores every word of a document from the gaze recorded while reading it.
pub struct Scorer {
    pub detector: Detector,
    pub featurizer: Featurizer,
    pub align: AlignConfig,
}

impl Scorer {
    pub fn new(detector: Detector, featurizer: Featurizer) -> Self {
        let align = align_config_for(&detector.config, 0);
        Scorer { detector, featurizer, align }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let table = ckpt.frequency.clone().unwrap_or_else(|| FrequencyTable::from_words([]));
        Ok(Scorer::new(ckpt.detector()?, Featurizer::new(ckpt.vocab()?, table)))
    }

    pub fn threshold(&self) -> f64 {
        self.detector.config.threshold
    }

    /// Conditions `raw`, anchors a window on every word and keeps the highest
    /// token score of the anchor word. Words without gaze coverage are
    /// skipped.
    pub fn score_session(&self, session_id: &str, user_id: &str, layout: &DocumentLayout, raw: &GazeTrace) -> Result<Vec<WordScore>> {
        if raw.len() < 2 {
            return Err(Error::Trace(format!("session {session_id} needs at least 2 samples, has {}", raw.len())));
        }
        raw.validate()?;
        let doc = self.featurizer.align(layout.clone());
        let session = ReadingSession {
            session_id: session_id.to_string(),
            user_id: user_id.to_string(),
            doc_id: layout.doc_id.clone(),
            trace: condition(raw, self.align.smooth_window, self.align.rate_hz)?,
            t_start: raw.first_t().unwrap_or_default(),
            t_end: raw.last_t().unwrap_or_default(),
            marked_words: BTreeSet::new(),
        };
        let mut out = Vec::with_capacity(layout.len());
        for word in 0..layout.len() {
            let w = match extract_context(&session, &doc, word, &self.align) {
                Ok(w) => w,
                Err(Error::NoCoverage { .. }) => continue,
                Err(e) => return Err(e),
            };
            let scores = self.detector.scores(&w)?;
            let best = w
                .token_words
                .iter()
                .zip(&scores)
                .filter(|(&tw, _)| tw == word)
                .map(|(_, &s)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                out.push(WordScore { word, text: layout.words[word].text.clone(), score: best });
            }
        }
        Ok(out)
    }
}

/// Words scoring at or above `threshold`.
pub fn flagged(scores: &[WordScore], threshold: f64) -> Vec<WordScore> {
    scores.iter().filter(|s| s.score >= threshold).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_corpus, SynthConfig};

    fn tiny() -> SynthCorpus {
        make_corpus(&SynthConfig { n_docs: 3, n_readers: 3, words_per_doc: 60, ..SynthConfig::default() }).unwrap()
    }

    #[test]
    fn scores_every_covered_word() {
        let corpus = tiny();
        let cfg = ModelConfig { n_p: 4, n_k: 4, dim: 8, layers: 1, heads: 1, ffn_dim: 8, ..ModelConfig::default() };
        let det = Detector::new(cfg).unwrap();
        let scorer = Scorer::new(det, Featurizer::new(Vocab::default_vocab().clone(), FrequencyTable::from_docs(&corpus.docs).unwrap()));
        let s = &corpus.sessions[0];
        let doc = corpus.docs.iter().find(|d| d.doc_id == s.doc_id).unwrap();
        let a = scorer.score_session(&s.session_id, &s.user_id, doc, &s.raw).unwrap();
        let b = scorer.score_session(&s.session_id, &s.user_id, doc, &s.raw).unwrap();
        assert_eq!(a, b);
        assert!(a.len() > doc.len() / 2);
        assert!(a.iter().all(|w| (0.0..=1.0).contains(&w.score)));
        assert!(a.windows(2).all(|p| p[0].word < p[1].word));
    }

    #[test]
    fn short_trace_rejected() {
        let corpus = tiny();
        let det = Detector::new(ModelConfig { n_p: 4, n_k: 4, dim: 8, layers: 1, heads: 1, ffn_dim: 8, ..ModelConfig::default() }).unwrap();
        let scorer = Scorer::new(det, Featurizer::new(Vocab::default_vocab().clone(), FrequencyTable::from_words([])));
        let empty = GazeTrace::new("s", vec![]).unwrap();
        assert!(scorer.score_session("s", "u", &corpus.docs[0], &empty).is_err());
    }

    #[test]
    fn prepared_windows_carry_features() {
        let corpus = tiny();
        let cfg = AlignConfig::default();
        let prep = prepare_corpus(&corpus, Vocab::default_vocab(), &cfg).unwrap();
        let ds = prep.windows(&cfg).unwrap();
        assert!(!ds.is_empty());
        assert!(ds.iter().all(|w| w.features.is_some()));

        let mut bare: Vec<ContextWindow> = ds.iter().map(|w| ContextWindow { features: None, ..w.clone() }).collect();
        attach_features(&mut bare, &prep.docs).unwrap();
        assert_eq!(bare, ds);
        assert!(attach_features(&mut bare, &BTreeMap::new()).is_err());
    }
}
