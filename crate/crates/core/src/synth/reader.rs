//! Reader behaviour: per-word dwell, regressions and noisy gaze samples.

use std::collections::{BTreeSet, HashSet};

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentLayout;
use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeTrace};
use crate::knowledge::normalize_word;
use crate::util::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderProfile {
    pub reader_id: String,
    /// Normalised word strings the reader does not know.
    pub unknown_vocab: BTreeSet<String>,
    /// Median dwell on a known word.
    pub base_dwell_ms: f64,
    pub dwell_multiplier_unknown: f64,
    pub p_regression: f64,
    pub noise_sigma_px: f64,
    /// Log-scale spread of dwell, truncated at 2.5 standard deviations.
    pub dwell_sigma: f64,
    pub sample_rate_hz: f64,
    /// Relative timestamp jitter, uniform in `±jitter`.
    pub jitter: f64,
}

impl ReaderProfile {
    pub fn new(reader_id: impl Into<String>, unknown_vocab: BTreeSet<String>) -> Self {
        ReaderProfile {
            reader_id: reader_id.into(),
            unknown_vocab,
            base_dwell_ms: 250.0,
            dwell_multiplier_unknown: 2.5,
            p_regression: 0.4,
            noise_sigma_px: 130.0,
            dwell_sigma: 0.15,
            sample_rate_hz: 30.0,
            jitter: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("profile {}: {m}", self.reader_id)));
        if !(self.dwell_multiplier_unknown > 1.0) {
            return bad("unknown-word dwell multiplier must exceed 1");
        }
        if !(0.0..=1.0).contains(&self.p_regression) {
            return bad("regression probability outside [0, 1]");
        }
        if !(self.noise_sigma_px >= 0.0 && self.dwell_sigma >= 0.0) {
            return bad("noise and dwell spread must be non-negative");
        }
        if !(self.base_dwell_ms > 0.0 && self.sample_rate_hz > 0.0) {
            return bad("dwell and sample rate must be positive");
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad("jitter outside [0, 1)");
        }
        Ok(())
    }

    pub fn knows(&self, word: &str) -> bool {
        !self.unknown_vocab.contains(&normalize_word(word))
    }
}

/// One continuous look at a word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub word: usize,
    pub start: f64,
    pub end: f64,
    pub regression: bool,
}

/// A simulated reading with its planted truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSession {
    pub session_id: String,
    pub user_id: String,
    pub doc_id: String,
    pub raw: GazeTrace,
    pub marked_words: BTreeSet<usize>,
    pub visits: Vec<Visit>,
}

fn dwell(p: &ReaderProfile, r: &mut Rng) -> f64 {
    let z: f64 = loop {
        let z: f64 = StandardNormal.sample(r);
        if z.abs() <= 2.5 {
            break z;
        }
    };
    p.base_dwell_ms * (p.dwell_sigma * z).exp()
}

fn center(doc: &DocumentLayout, w: usize) -> (f64, f64) {
    let b = &doc.words[w];
    (b.x, b.y)
}

/// Reads `doc` word by word. Unknown words get a multiplied dwell and, with
/// probability `p_regression`, a second look right after the next word. Raw
/// samples arrive at the jittered sample rate around the current word's box
/// center.
pub fn simulate_session(
    doc: &DocumentLayout,
    profile: &ReaderProfile,
    session_id: impl Into<String>,
    seed: u64,
) -> Result<SynthSession> {
    if doc.is_empty() {
        return Err(Error::InvalidArgument(format!("document {} has no words", doc.doc_id)));
    }
    profile.validate()?;
    let mut r = crate::util::rng(seed);
    let unknown: Vec<bool> = doc.words.iter().map(|w| !profile.knows(&w.text)).collect();

    let mut visits = Vec::with_capacity(doc.len() + 16);
    let mut t = 0.0;
    let mut push = |word: usize, d: f64, regression: bool, t: &mut f64| {
        visits.push(Visit { word, start: *t, end: *t + d, regression });
        *t += d;
    };
    let mut pending: Option<usize> = None;
    for w in 0..doc.len() {
        let mut d = dwell(profile, &mut r);
        if unknown[w] {
            d *= profile.dwell_multiplier_unknown;
        }
        push(w, d, false, &mut t);
        if let Some(back) = pending.take() {
            let d = dwell(profile, &mut r);
            push(back, d, true, &mut t);
        }
        if unknown[w] && w + 1 < doc.len() && r.random_bool(profile.p_regression) {
            pending = Some(w);
        }
    }

    let noise = Normal::new(0.0, profile.noise_sigma_px.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let step = 1000.0 / profile.sample_rate_hz;
    let mut samples = Vec::with_capacity((t / step) as usize + 2);
    let mut st = r.random_range(0.0..step);
    let mut vi = 0;
    while st < t {
        while visits[vi].end <= st {
            vi += 1;
        }
        let (cx, cy) = center(doc, visits[vi].word);
        let (nx, ny) = if profile.noise_sigma_px > 0.0 { (noise.sample(&mut r), noise.sample(&mut r)) } else { (0.0, 0.0) };
        samples.push(GazeSample::new(st, cx + nx, cy + ny));
        st += step * (1.0 + r.random_range(-profile.jitter..=profile.jitter));
    }
    let session_id = session_id.into();
    let raw = GazeTrace::new(session_id.clone(), samples)?;
    let marked_words = unknown.iter().enumerate().filter(|(_, &u)| u).map(|(i, _)| i).collect();
    Ok(SynthSession {
        session_id,
        user_id: profile.reader_id.clone(),
        doc_id: doc.doc_id.clone(),
        raw,
        marked_words,
        visits,
    })
}

/// Total time per word estimated from raw samples snapped to the nearest box
/// center, one sample interval per sample.
pub fn dwell_estimates(doc: &DocumentLayout, raw: &GazeTrace) -> Vec<f64> {
    let mut out = vec![0.0; doc.len()];
    if raw.samples.len() < 2 {
        return out;
    }
    let interval = (raw.samples.last().unwrap().t - raw.samples[0].t) / (raw.samples.len() - 1) as f64;
    let centers: Vec<(f64, f64)> = (0..doc.len()).map(|w| center(doc, w)).collect();
    for s in &raw.samples {
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 .0 - s.x).powi(2) + (a.1 .1 - s.y).powi(2);
                let db = (b.1 .0 - s.x).powi(2) + (b.1 .1 - s.y).powi(2);
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .expect("non-empty document");
        out[nearest] += interval;
    }
    out
}

/// Dwell above which a word is flagged by [`dwell_baseline`]: 85% of the
/// shortest possible first-look dwell on an unknown word.
pub fn dwell_threshold(p: &ReaderProfile) -> f64 {
    0.85 * p.base_dwell_ms * p.dwell_multiplier_unknown * (-2.5 * p.dwell_sigma).exp()
}

/// Flags words whose estimated dwell reaches [`dwell_threshold`].
pub fn dwell_baseline(doc: &DocumentLayout, raw: &GazeTrace, p: &ReaderProfile) -> BTreeSet<usize> {
    let th = dwell_threshold(p);
    dwell_estimates(doc, raw).iter().enumerate().filter(|(_, &d)| d >= th).map(|(i, _)| i).collect()
}

/// Distinct normalised word strings of `doc`.
pub fn doc_vocabulary(doc: &DocumentLayout) -> HashSet<String> {
    doc.words.iter().map(|w| normalize_word(&w.text)).filter(|w| !w.is_empty()).collect()
}
