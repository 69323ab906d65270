//! Gaze-text alignment under the uniform reading-speed assumption, context
//! windows around candidate words, and negative sampling.

mod dataset;
mod window;

pub use dataset::{build_dataset, read_dataset, write_dataset, AlignedDocument};
pub use window::{extract_context, make_negatives, ContextWindow};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Total width of the context interval, centered on the anchor word.
    pub context_ms: f64,
    pub n_gaze: usize,
    pub n_txt: usize,
    pub smooth_window: usize,
    pub rate_hz: f64,
    /// Negatives emitted per positive window.
    pub neg_ratio: usize,
    /// Unmarked-word windows sampled per marked word.
    pub unmarked_factor: usize,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            context_ms: 1000.0,
            n_gaze: 20,
            n_txt: 64,
            smooth_window: crate::gaze::DEFAULT_SMOOTH_WINDOW,
            rate_hz: crate::gaze::DEFAULT_RATE_HZ,
            neg_ratio: 1,
            unmarked_factor: 2,
            seed: 0,
        }
    }
}

impl AlignConfig {
    pub fn half_window(&self) -> f64 {
        self.context_ms / 2.0
    }
}

/// A read-through of one document by one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingSession {
    pub session_id: String,
    #[serde(default)]
    pub user_id: String,
    pub doc_id: String,
    pub trace: GazeTrace,
    pub t_start: f64,
    pub t_end: f64,
    pub marked_words: BTreeSet<usize>,
}

impl ReadingSession {
    pub fn validate(&self, n_words: usize) -> Result<()> {
        if !(self.t_start < self.t_end) {
            return Err(Error::InvalidArgument(format!(
                "session {}: t_start {} must precede t_end {}",
                self.session_id, self.t_start, self.t_end
            )));
        }
        if let Some(&w) = self.marked_words.iter().find(|&&w| w >= n_words) {
            return Err(Error::InvalidArgument(format!(
                "session {}: marked word {w} outside document of {n_words} words",
                self.session_id
            )));
        }
        Ok(())
    }
}

/// Anticipated reading time of each word: word `i` of `n` sits at
/// `t_start + (i + 0.5) * (t_end - t_start) / n`.
pub fn anticipate_word_times(t_start: f64, t_end: f64, n_words: usize) -> Result<Vec<f64>> {
    if n_words == 0 {
        return Err(Error::InvalidArgument("cannot anticipate word times for an empty document".into()));
    }
    let per_word = (t_end - t_start) / n_words as f64;
    Ok((0..n_words).map(|i| t_start + (i as f64 + 0.5) * per_word).collect())
}

/// Splits samples at the given times into half-open segments
/// `[b[k-1], b[k])`; `boundaries.len() + 1` segments are returned.
pub fn chunk_gaze(trace: &GazeTrace, boundaries: &[f64]) -> Result<Vec<Vec<GazeSample>>> {
    if boundaries.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("chunk boundaries must be sorted".into()));
    }
    let mut segments = vec![Vec::new(); boundaries.len() + 1];
    let mut k = 0;
    for s in &trace.samples {
        while k < boundaries.len() && s.t >= boundaries[k] {
            k += 1;
        }
        segments[k].push(*s);
    }
    Ok(segments)
}
