//! Synthetic reading sessions with planted unknown words.
//!
//! Articles are drawn from a fixed Zipf word bank and laid out on a
//! 1920×1080 page. Each reader's unknown vocabulary is a random share of a
//! rare-tail pool sized so pairwise Jaccard similarity lands in a configured
//! band. Every reader reads every article; the planted truth of a session is
//! the set of its words in the reader's unknown vocabulary.

mod reader;
mod wordbank;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use reader::{
    doc_vocabulary, dwell_baseline, dwell_estimates, dwell_threshold, simulate_session, ReaderProfile, SynthSession,
    Visit,
};
pub use wordbank::{BankWord, WordBank, WordClass, CONTENT_WORDS, ENTITY_WORDS};

use crate::align::{AlignConfig, ReadingSession};
use crate::corpus::{load_document, DocumentLayout, WordBox};
use crate::error::{Error, Result};
use crate::eval::{jaccard_matrix, mean_off_diagonal};
use crate::gaze::{condition, read_trace, write_trace, GazeTrace};
use crate::knowledge::normalize_word;
use crate::util::{read_json, read_jsonl, rng, sub_seed, write_json, write_jsonl, Rng};

pub const SCREEN_WIDTH: f64 = 1920.0;
pub const SCREEN_HEIGHT: f64 = 1080.0;
pub const MARGIN: f64 = 100.0;
pub const LINE_HEIGHT: f64 = 32.0;
pub const CHAR_WIDTH: f64 = 11.0;
pub const BOX_HEIGHT: f64 = 24.0;

/// Pool of words with identical frequency, POS and NER, each unknown to
/// exactly half of the readers, so only gaze separates readers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminableConfig {
    pub words: usize,
    /// Occurrences of every pool word across the corpus.
    pub occurrences: usize,
}

impl Default for DiscriminableConfig {
    fn default() -> Self {
        DiscriminableConfig { words: 48, occurrences: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub n_readers: usize,
    pub words_per_doc: usize,
    pub seed: u64,
    /// Share of corpus tokens that belong to the rare-tail pool.
    pub pool_mass: f64,
    pub target_jaccard: f64,
    pub jaccard_band: (f64, f64),
    pub max_attempts: usize,
    pub base_dwell_ms: f64,
    pub dwell_sigma: f64,
    pub dwell_multiplier_unknown: f64,
    pub p_regression: f64,
    pub noise_sigma_px: f64,
    pub sample_rate_hz: f64,
    pub jitter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminable: Option<DiscriminableConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 36,
            n_readers: 12,
            words_per_doc: 386,
            seed: 0,
            pool_mass: 0.065,
            target_jaccard: 0.23,
            jaccard_band: (0.15, 0.35),
            max_attempts: 20,
            base_dwell_ms: 250.0,
            dwell_sigma: 0.15,
            dwell_multiplier_unknown: 2.5,
            p_regression: 0.4,
            noise_sigma_px: 130.0,
            sample_rate_hz: 30.0,
            jitter: 0.2,
            discriminable: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 || self.n_readers == 0 || self.words_per_doc == 0 {
            return Err(Error::InvalidArgument("docs, readers and words per doc must be >= 1".into()));
        }
        let (lo, hi) = self.jaccard_band;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("Jaccard band [{lo}, {hi}] is not a sub-interval of [0, 1]")));
        }
        if !(self.pool_mass > 0.0 && self.pool_mass < 1.0) {
            return Err(Error::InvalidArgument("pool mass must lie in (0, 1)".into()));
        }
        if !(self.target_jaccard > 0.0 && self.target_jaccard <= 1.0) {
            return Err(Error::InvalidArgument("target Jaccard must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn profile(&self, reader_id: String, unknown: BTreeSet<String>) -> ReaderProfile {
        ReaderProfile {
            base_dwell_ms: self.base_dwell_ms,
            dwell_multiplier_unknown: self.dwell_multiplier_unknown,
            p_regression: self.p_regression,
            noise_sigma_px: self.noise_sigma_px,
            dwell_sigma: self.dwell_sigma,
            sample_rate_hz: self.sample_rate_hz,
            jitter: self.jitter,
            ..ReaderProfile::new(reader_id, unknown)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub docs: Vec<DocumentLayout>,
    pub profiles: Vec<ReaderProfile>,
    pub sessions: Vec<SynthSession>,
    /// Candidate unknown words the profiles were drawn from.
    pub pool: BTreeSet<String>,
}

/// Per-session metadata stored next to the raw traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub user_id: String,
    pub doc_id: String,
    pub marked_words: BTreeSet<usize>,
}

/// Lays words out left to right, wrapping at the right margin.
pub fn layout_words(doc_id: &str, texts: &[String]) -> Result<DocumentLayout> {
    let mut words = Vec::with_capacity(texts.len());
    let (mut x, mut line) = (MARGIN, 0usize);
    for (index, text) in texts.iter().enumerate() {
        let w = CHAR_WIDTH * text.chars().count() as f64;
        if x > MARGIN && x + w > SCREEN_WIDTH - MARGIN {
            x = MARGIN;
            line += 1;
        }
        let y = MARGIN + LINE_HEIGHT * line as f64 + BOX_HEIGHT / 2.0;
        words.push(WordBox { index, text: text.clone(), x: x + w / 2.0, y, w, h: BOX_HEIGHT, page: 0 });
        x += w + CHAR_WIDTH;
    }
    DocumentLayout::new(doc_id, "", words)
}

fn article(bank: &WordBank, n: usize, r: &mut Rng) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut until_stop = r.random_range(8..=20);
    for _ in 0..n {
        let mut w = bank.words[bank.sample(r)].text.clone();
        until_stop -= 1;
        if until_stop == 0 {
            w.push('.');
            until_stop = r.random_range(8..=20);
        }
        out.push(w);
    }
    out
}

/// Rarest content words by corpus count (then by bank rank) until they cover
/// `mass` of all tokens.
fn rare_pool(bank: &WordBank, docs: &[Vec<String>], mass: f64) -> BTreeSet<String> {
    let rank: BTreeMap<&str, usize> = bank.words.iter().enumerate().map(|(i, w)| (w.text.as_str(), i)).collect();
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for w in docs.iter().flatten() {
        total += 1;
        *counts.entry(normalize_word(w)).or_default() += 1;
    }
    let mut candidates: Vec<(&String, u64, usize)> = counts
        .iter()
        .filter_map(|(w, &c)| {
            let r = *rank.get(w.as_str())?;
            (bank.words[r].class == WordClass::Content).then_some((w, c, r))
        })
        .collect();
    candidates.sort_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)));
    let need = (mass * total as f64).ceil() as u64;
    let mut acc = 0;
    let mut pool = BTreeSet::new();
    for (w, c, _) in candidates {
        if acc >= need {
            break;
        }
        acc += c;
        pool.insert(w.clone());
    }
    pool
}

/// Fresh equal-length noun strings absent from the bank.
fn distractor_words(bank: &WordBank, n: usize, r: &mut Rng) -> Vec<String> {
    let taken: HashSet<String> = bank.words.iter().map(|w| w.text.to_lowercase()).collect();
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let w = format!("{}{}ment", wordbank::syllable(r), wordbank::syllable(r));
        if w.len() == 10 && !taken.contains(&w) && !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Mean pairwise Jaccard similarity of the profiles' unknown vocabularies;
/// 1.0 for a single reader.
pub fn profile_jaccard(profiles: &[ReaderProfile]) -> f64 {
    let sets: Vec<BTreeSet<String>> = profiles.iter().map(|p| p.unknown_vocab.clone()).collect();
    mean_off_diagonal(&jaccard_matrix(&sets))
}

/// Generates articles, reader profiles and one session per (reader, article).
pub fn make_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let bank = WordBank::standard();
    let mut r = rng(sub_seed(cfg.seed, 1));
    let mut texts: Vec<Vec<String>> = (0..cfg.n_docs).map(|_| article(bank, cfg.words_per_doc, &mut r)).collect();

    let (pool, profiles) = match cfg.discriminable {
        None => {
            let pool = rare_pool(bank, &texts, cfg.pool_mass);
            let pool_vec: Vec<&String> = pool.iter().collect();
            let share = 2.0 * cfg.target_jaccard / (1.0 + cfg.target_jaccard);
            let k = ((share * pool_vec.len() as f64).round() as usize).clamp(usize::from(!pool_vec.is_empty()), pool_vec.len());
            let mut accepted = None;
            for attempt in 0..cfg.max_attempts.max(1) {
                let mut pr = rng(sub_seed(cfg.seed, 100 + attempt as u64));
                let profiles: Vec<ReaderProfile> = (0..cfg.n_readers)
                    .map(|u| {
                        let unknown = sample(&mut pr, pool_vec.len(), k).into_iter().map(|i| pool_vec[i].clone()).collect();
                        cfg.profile(format!("u{u:02}"), unknown)
                    })
                    .collect();
                let j = profile_jaccard(&profiles);
                if cfg.n_readers == 1 || (cfg.jaccard_band.0..=cfg.jaccard_band.1).contains(&j) {
                    accepted = Some(profiles);
                    break;
                }
                log::debug!("attempt {attempt}: mean Jaccard {j:.3} outside band");
            }
            let profiles = accepted.ok_or_else(|| {
                Error::Infeasible(format!(
                    "no profile draw in {} attempts reached mean Jaccard in [{}, {}] with a pool of {} words",
                    cfg.max_attempts, cfg.jaccard_band.0, cfg.jaccard_band.1, pool_vec.len()
                ))
            })?;
            (pool, profiles)
        }
        Some(d) => {
            let words = distractor_words(bank, d.words, &mut r);
            let function: HashSet<&str> =
                bank.words.iter().filter(|w| w.class == WordClass::Function).map(|w| w.text.as_str()).collect();
            let slots: Vec<(usize, usize)> = texts
                .iter()
                .enumerate()
                .flat_map(|(di, t)| (0..t.len()).map(move |wi| (di, wi)))
                .filter(|&(di, wi)| !function.contains(texts[di][wi].as_str()) && !texts[di][wi].ends_with('.'))
                .collect();
            let need = d.words * d.occurrences;
            if slots.len() < need {
                return Err(Error::Infeasible(format!("{need} distractor slots requested, corpus offers {}", slots.len())));
            }
            let picks = sample(&mut r, slots.len(), need).into_vec();
            for (n, &p) in picks.iter().enumerate() {
                let (di, wi) = slots[p];
                texts[di][wi] = words[n % d.words].clone();
            }
            let mut unknown: Vec<BTreeSet<String>> = vec![BTreeSet::new(); cfg.n_readers];
            let half = cfg.n_readers / 2;
            for w in &words {
                for u in sample(&mut r, cfg.n_readers, half.max(1)) {
                    unknown[u].insert(w.clone());
                }
            }
            let profiles: Vec<ReaderProfile> =
                unknown.into_iter().enumerate().map(|(u, s)| cfg.profile(format!("u{u:02}"), s)).collect();
            let j = profile_jaccard(&profiles);
            if cfg.n_readers > 1 && !(cfg.jaccard_band.0..=cfg.jaccard_band.1).contains(&j) {
                return Err(Error::Infeasible(format!("distractor profiles have mean Jaccard {j:.3}")));
            }
            (words.into_iter().collect(), profiles)
        }
    };

    let docs = texts
        .iter()
        .enumerate()
        .map(|(d, t)| layout_words(&format!("doc{d:02}"), t))
        .collect::<Result<Vec<_>>>()?;
    let mut sessions = Vec::with_capacity(cfg.n_docs * cfg.n_readers);
    for p in &profiles {
        for doc in &docs {
            let id = format!("{}-{}", p.reader_id, doc.doc_id);
            let seed = sub_seed(cfg.seed, crate::util::fnv1a(&id));
            sessions.push(simulate_session(doc, p, id, seed)?);
        }
    }
    Ok(SynthCorpus { config: cfg.clone(), docs, profiles, sessions, pool })
}

/// Conditions a raw trace and wraps it as an alignment input. The reading span
/// is the raw trace's first to last sample.
pub fn reading_session(
    session_id: &str,
    user_id: &str,
    doc_id: &str,
    raw: &GazeTrace,
    marked_words: BTreeSet<usize>,
    cfg: &AlignConfig,
) -> Result<ReadingSession> {
    let (Some(t_start), Some(t_end)) = (raw.first_t(), raw.last_t()) else {
        return Err(Error::Trace(format!("session {session_id} has an empty trace")));
    };
    Ok(ReadingSession {
        session_id: session_id.to_string(),
        user_id: user_id.to_string(),
        doc_id: doc_id.to_string(),
        trace: condition(raw, cfg.smooth_window, cfg.rate_hz)?,
        t_start,
        t_end,
        marked_words,
    })
}

impl SynthSession {
    pub fn reading_session(&self, cfg: &AlignConfig) -> Result<ReadingSession> {
        reading_session(&self.session_id, &self.user_id, &self.doc_id, &self.raw, self.marked_words.clone(), cfg)
    }

    pub fn meta(&self) -> SessionMeta {
        SessionMeta {
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            doc_id: self.doc_id.clone(),
            marked_words: self.marked_words.clone(),
        }
    }
}

impl SynthCorpus {
    /// Writes `docs/<id>.json`, `traces/<session>.jsonl`, `sessions.jsonl`,
    /// `profiles.json` and `synth.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("docs"))?;
        std::fs::create_dir_all(dir.join("traces"))?;
        for d in &self.docs {
            write_json(&dir.join("docs").join(format!("{}.json", d.doc_id)), d)?;
        }
        for s in &self.sessions {
            write_trace(&dir.join("traces").join(format!("{}.jsonl", s.session_id)), &s.raw)?;
        }
        let metas: Vec<SessionMeta> = self.sessions.iter().map(SynthSession::meta).collect();
        write_jsonl(&dir.join("sessions.jsonl"), &metas)?;
        write_json(&dir.join("profiles.json"), &self.profiles)?;
        write_json(&dir.join("synth.json"), &self.config)?;
        Ok(())
    }
}

/// Documents and raw sessions read back from a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusDir {
    pub docs: BTreeMap<String, DocumentLayout>,
    pub sessions: Vec<(SessionMeta, GazeTrace)>,
    pub profiles: Vec<ReaderProfile>,
}

pub fn read_corpus_dir(dir: &Path) -> Result<CorpusDir> {
    let mut docs = BTreeMap::new();
    let mut paths: Vec<_> = std::fs::read_dir(dir.join("docs"))?.collect::<std::io::Result<Vec<_>>>()?;
    paths.sort_by_key(|e| e.path());
    for e in paths {
        let d = load_document(&e.path())?;
        docs.insert(d.doc_id.clone(), d);
    }
    let metas: Vec<SessionMeta> = read_jsonl(&dir.join("sessions.jsonl"))?;
    let mut sessions = Vec::with_capacity(metas.len());
    for m in metas {
        let trace = read_trace(&dir.join("traces").join(format!("{}.jsonl", m.session_id)))?;
        sessions.push((m, trace));
    }
    let profiles = if dir.join("profiles.json").exists() { read_json(&dir.join("profiles.json"))? } else { Vec::new() };
    Ok(CorpusDir { docs, sessions, profiles })
}

#[cfg(test)]
mod tests;
