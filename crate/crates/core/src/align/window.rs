use std::ops::Range;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::dataset::AlignedDocument;
use super::{anticipate_word_times, AlignConfig, ReadingSession};
use crate::error::{Error, Result};
use crate::knowledge::TokenFeatures;
use crate::util::Rng;

/// One training/inference example: a fixed-length gaze segment paired with a
/// contiguous token slice of the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub session_id: String,
    pub user_id: String,
    pub doc_id: String,
    pub anchor_word: usize,
    pub is_negative: bool,
    /// Document token indices, contiguous and ascending.
    pub token_slice: Vec<usize>,
    pub token_ids: Vec<u32>,
    /// Owning word ordinal per token.
    pub token_words: Vec<usize>,
    /// Owning word box center per token, pixels.
    pub token_pos: Vec<[f64; 2]>,
    pub token_labels: Vec<u8>,
    /// Exactly `n_gaze` resampled gaze points, pixels.
    pub gaze_segment: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<TokenFeatures>>,
}

impl ContextWindow {
    pub fn len(&self) -> usize {
        self.token_slice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_slice.is_empty()
    }

    pub fn validate(&self, n_gaze: usize, n_txt: usize) -> Result<()> {
        let n = self.token_slice.len();
        let bad = |m: String| Err(Error::InvalidArgument(format!("window {}@{}: {m}", self.session_id, self.anchor_word)));
        if n == 0 || n > n_txt {
            return bad(format!("token slice length {n} outside 1..={n_txt}"));
        }
        if self.token_slice.windows(2).any(|w| w[1] != w[0] + 1) {
            return bad("token slice is not contiguous".into());
        }
        if self.token_ids.len() != n || self.token_words.len() != n || self.token_pos.len() != n || self.token_labels.len() != n {
            return bad("per-token columns disagree in length".into());
        }
        if self.features.as_ref().is_some_and(|f| f.len() != n) {
            return bad("feature rows disagree with token slice".into());
        }
        if self.gaze_segment.len() != n_gaze {
            return bad(format!("gaze segment has {} samples, expected {n_gaze}", self.gaze_segment.len()));
        }
        if self.token_labels.iter().any(|&l| l > 1) {
            return bad("labels must be 0 or 1".into());
        }
        if self.is_negative && self.token_labels.contains(&1) {
            return bad("negative window carries a positive label".into());
        }
        Ok(())
    }

    /// Word ordinals labelled unknown in this window.
    pub fn truth_words(&self) -> std::collections::BTreeSet<usize> {
        self.token_words
            .iter()
            .zip(&self.token_labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&w, _)| w)
            .collect()
    }
}

/// Words whose anticipated time lies in `[center - half, center + half]`.
fn words_in_interval(times: &[f64], center: f64, half: f64) -> Range<usize> {
    let lo = times.partition_point(|&t| t < center - half);
    let hi = times.partition_point(|&t| t <= center + half);
    lo..hi
}

/// Token range of the words read around `word`, cut to at most `n_txt`
/// tokens centered on the word's own tokens.
fn token_range(doc: &AlignedDocument, times: &[f64], word: usize, cfg: &AlignConfig) -> Range<usize> {
    let words = words_in_interval(times, times[word], cfg.half_window());
    let start = doc.spans[words.start].start;
    let end = doc.spans[words.end - 1].end;
    if end - start <= cfg.n_txt {
        return start..end;
    }
    let own = &doc.spans[word];
    let center = (own.start + own.end) / 2;
    let s = center.saturating_sub(cfg.n_txt / 2).clamp(start, end - cfg.n_txt);
    s..s + cfg.n_txt
}

fn fill_tokens(
    window: &mut ContextWindow,
    doc: &AlignedDocument,
    range: Range<usize>,
    session: &ReadingSession,
    labelled: bool,
) {
    window.token_slice = range.clone().collect();
    window.token_ids = range.clone().map(|i| doc.tdoc.tokens[i].id).collect();
    window.token_words = range.clone().map(|i| doc.tdoc.tokens[i].word_index).collect();
    window.token_pos = window
        .token_words
        .iter()
        .map(|&w| {
            let b = &doc.layout.words[w];
            [b.x, b.y]
        })
        .collect();
    window.token_labels = window
        .token_words
        .iter()
        .map(|w| u8::from(labelled && session.marked_words.contains(w)))
        .collect();
    window.features = doc.features.as_ref().map(|f| range.map(|i| f.tokens[i]).collect());
}

pub(crate) fn extract_with_times(
    session: &ReadingSession,
    doc: &AlignedDocument,
    times: &[f64],
    word: usize,
    cfg: &AlignConfig,
) -> Result<ContextWindow> {
    if word >= times.len() {
        return Err(Error::InvalidArgument(format!("word {word} outside document of {} words", times.len())));
    }
    let center = times[word];
    let half = cfg.half_window();
    let samples = &session.trace.samples;
    let lo = samples.partition_point(|s| s.t < center - half);
    let hi = samples.partition_point(|s| s.t < center + half);
    if lo >= hi {
        return Err(Error::NoCoverage { word });
    }
    let mut gaze: Vec<[f64; 2]> = samples[lo..hi].iter().take(cfg.n_gaze).map(|s| [s.x, s.y]).collect();
    let last = *gaze.last().expect("non-empty segment");
    gaze.resize(cfg.n_gaze, last);

    let mut window = ContextWindow {
        session_id: session.session_id.clone(),
        user_id: session.user_id.clone(),
        doc_id: session.doc_id.clone(),
        anchor_word: word,
        is_negative: false,
        token_slice: Vec::new(),
        token_ids: Vec::new(),
        token_words: Vec::new(),
        token_pos: Vec::new(),
        token_labels: Vec::new(),
        gaze_segment: gaze,
        features: None,
    };
    fill_tokens(&mut window, doc, token_range(doc, times, word, cfg), session, true);
    window.validate(cfg.n_gaze, cfg.n_txt)?;
    Ok(window)
}

/// Builds the context window anchored on `word`: tokens of every word whose
/// anticipated time falls within half the context width of the anchor's, and
/// the resampled gaze in the same interval padded with its final sample.
pub fn extract_context(
    session: &ReadingSession,
    doc: &AlignedDocument,
    word: usize,
    cfg: &AlignConfig,
) -> Result<ContextWindow> {
    let times = anticipate_word_times(session.t_start, session.t_end, doc.layout.len())?;
    extract_with_times(session, doc, &times, word, cfg)
}

/// For each positive, pairs its gaze with `ratio` token slices centered on
/// marked words read at least one full context width away. Labels are all
/// zero. Positives without enough eligible words get fewer negatives.
pub fn make_negatives(
    positives: &[ContextWindow],
    session: &ReadingSession,
    doc: &AlignedDocument,
    ratio: usize,
    cfg: &AlignConfig,
    rng: &mut Rng,
) -> Result<Vec<ContextWindow>> {
    if ratio == 0 || positives.is_empty() {
        return Ok(Vec::new());
    }
    let times = anticipate_word_times(session.t_start, session.t_end, doc.layout.len())?;
    let mut out = Vec::with_capacity(positives.len() * ratio);
    for pos in positives {
        let t_pos = times[pos.anchor_word];
        let eligible: Vec<usize> = session
            .marked_words
            .iter()
            .copied()
            .filter(|&m| (times[m] - t_pos).abs() >= cfg.context_ms)
            .collect();
        if eligible.len() < ratio {
            log::warn!(
                "session {}: word {} has {} eligible negative substitutes, wanted {ratio}",
                session.session_id,
                pos.anchor_word,
                eligible.len()
            );
        }
        let take = ratio.min(eligible.len());
        let mut picks: Vec<usize> = sample(rng, eligible.len(), take).into_iter().map(|i| eligible[i]).collect();
        picks.sort_unstable();
        for m in picks {
            let mut neg = pos.clone();
            neg.anchor_word = m;
            neg.is_negative = true;
            fill_tokens(&mut neg, doc, token_range(doc, &times, m, cfg), session, false);
            neg.validate(cfg.n_gaze, cfg.n_txt)?;
            out.push(neg);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentLayout, Vocab, WordBox};
    use crate::gaze::{GazeSample, GazeTrace};

    fn layout(n: usize) -> DocumentLayout {
        let words = (0..n)
            .map(|i| WordBox { index: i, text: format!("w{i}"), x: 50.0 + 60.0 * (i % 20) as f64, y: 100.0 + 30.0 * (i / 20) as f64, w: 50.0, h: 20.0, page: 0 })
            .collect();
        DocumentLayout::new("doc", "", words).unwrap()
    }

    fn vocab() -> Vocab {
        Vocab::from_tokens(["w", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9"]).unwrap()
    }

    fn single_token_vocab(n: usize) -> Vocab {
        Vocab::from_tokens((0..n).map(|i| format!("w{i}"))).unwrap()
    }

    /// 20 Hz trace over [t0, t1], x = t.
    fn session(n_words: usize, t0: f64, t1: f64, marked: &[usize]) -> ReadingSession {
        let mut samples = Vec::new();
        let mut t = t0;
        while t <= t1 + 1e-9 {
            samples.push(GazeSample::new(t, t, 0.0));
            t += 50.0;
        }
        let mut trace = GazeTrace::new("s1", samples).unwrap();
        trace.rate_hz = Some(20.0);
        let _ = n_words;
        ReadingSession {
            session_id: "s1".into(),
            user_id: "u1".into(),
            doc_id: "doc".into(),
            trace,
            t_start: 0.0,
            t_end: 10_000.0,
            marked_words: marked.iter().copied().collect(),
        }
    }

    #[test]
    fn full_coverage_gives_twenty_samples() {
        let doc = AlignedDocument::new(layout(20), &single_token_vocab(20));
        let s = session(20, 0.0, 10_000.0, &[10]);
        let w = extract_context(&s, &doc, 10, &AlignConfig::default()).unwrap();
        assert_eq!(w.gaze_segment.len(), 20);
        // word 10 at 5250 ms; interval [4750, 5750)
        assert_eq!(w.gaze_segment[0][0], 4750.0);
        assert_eq!(w.gaze_segment[19][0], 5700.0);
        // words at 4750..=5750: 500 ms per word => words 9, 10, 11
        assert_eq!(w.token_words, [9, 10, 11]);
        assert_eq!(w.token_labels, [0, 1, 0]);
        assert_eq!(w.truth_words().into_iter().collect::<Vec<_>>(), [10]);
    }

    #[test]
    fn edge_window_pads_with_last_sample() {
        let doc = AlignedDocument::new(layout(20), &single_token_vocab(20));
        // Trace ends at 5350: [4750, 5750) holds 4750..=5350 => 13 samples.
        let s = session(20, 0.0, 5350.0, &[]);
        let w = extract_context(&s, &doc, 10, &AlignConfig::default()).unwrap();
        assert_eq!(w.gaze_segment.len(), 20);
        assert_eq!(w.gaze_segment[12][0], 5350.0);
        assert!(w.gaze_segment[12..].iter().all(|g| g[0] == 5350.0));
        assert_eq!(w.gaze_segment[11][0], 5300.0);
    }

    #[test]
    fn uncovered_window_is_an_error() {
        let doc = AlignedDocument::new(layout(20), &single_token_vocab(20));
        let s = session(20, 0.0, 2000.0, &[]);
        assert!(matches!(extract_context(&s, &doc, 15, &AlignConfig::default()), Err(Error::NoCoverage { word: 15 })));
    }

    #[test]
    fn multi_token_words_and_truncation() {
        // every word "w12" => tokens "w","1","2": 3 tokens per 2-digit word
        let doc = AlignedDocument::new(layout(40), &vocab());
        let s = session(40, 0.0, 10_000.0, &[20]);
        let cfg = AlignConfig { n_txt: 4, ..AlignConfig::default() };
        let w = extract_context(&s, &doc, 20, &cfg).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.token_words.contains(&20));
        let full = extract_context(&s, &doc, 20, &AlignConfig::default()).unwrap();
        // 250 ms per word: words 18..=22
        assert_eq!(full.token_words.iter().copied().collect::<std::collections::BTreeSet<_>>(), (18..=22).collect());
        assert_eq!(full.token_labels.iter().filter(|&&l| l == 1).count(), 3);
    }

    #[test]
    fn negatives_substitute_distant_marked_words() {
        let doc = AlignedDocument::new(layout(20), &single_token_vocab(20));
        let s = session(20, 0.0, 10_000.0, &[2, 16]);
        let cfg = AlignConfig::default();
        let pos: Vec<_> = [2, 16].iter().map(|&w| extract_context(&s, &doc, w, &cfg).unwrap()).collect();
        let mut rng = crate::util::rng(3);
        assert!(make_negatives(&pos, &s, &doc, 0, &cfg, &mut rng).unwrap().is_empty());
        let negs = make_negatives(&pos, &s, &doc, 1, &cfg, &mut rng).unwrap();
        assert_eq!(negs.len(), 2);
        for (p, n) in pos.iter().zip(&negs) {
            assert!(n.is_negative);
            assert_ne!(n.token_slice, p.token_slice);
            assert_eq!(n.gaze_segment, p.gaze_segment);
            assert!(n.token_labels.iter().all(|&l| l == 0));
        }
        assert_eq!(negs[0].anchor_word, 16);
        assert_eq!(negs[1].anchor_word, 2);
        // ratio above the eligible count emits fewer
        assert_eq!(make_negatives(&pos, &s, &doc, 3, &cfg, &mut rng).unwrap().len(), 2);
    }
}
