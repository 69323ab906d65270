//! Metrics, dataset splits, transfer protocols, Jaccard analysis and
//! ablations.

mod protocol;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use protocol::{evaluate, folds, run_protocol, EvalOptions, Protocol};

use crate::align::ContextWindow;
use crate::error::{Error, Result};
use crate::model::{FeatureBlocks, ModelConfig};
use crate::util::rng;

/// Published scores kept for comparison in reports. They come from a private
/// human dataset and a pretrained language-model encoder, so they are not
/// expected to be reproduced.
pub mod reference {
    pub const BEST_PRECISION: f64 = 71.21;
    pub const BEST_RECALL: f64 = 80.70;
    pub const BEST_F1: f64 = 75.73;
    pub const BEST_ACCURACY: f64 = 98.09;
    pub const CROSS_USER_F1: (f64, f64) = (78.26, 4.53);
    pub const CROSS_DOC_F1: (f64, f64) = (56.31, 3.38);
    pub const NO_CONTEXT_F1: f64 = 10.00;
    pub const NO_GAZE_F1: f64 = 75.59;
    pub const NO_KNOWLEDGE_F1: f64 = 74.93;
    pub const MEAN_JACCARD: f64 = 0.23;
    pub const N_USERS: usize = 12;
    pub const N_DOCS: usize = 36;
}

/// Word-level micro-averaged scores, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub token_accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, token_correct: usize, token_total: usize) -> Metrics {
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        let precision = pct(tp, tp + fp);
        let recall = pct(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics { precision, recall, f1, token_accuracy: pct(token_correct, token_total), tp, fp, fn_ }
    }
}

/// Micro-averaged word scores over windows. `token_accuracy` is left at 0;
/// [`evaluate`] fills it from token flags.
pub fn metrics(predicted: &[BTreeSet<usize>], truth: &[BTreeSet<usize>]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} windows", predicted.len(), truth.len())));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, t) in predicted.iter().zip(truth) {
        let hit = p.intersection(t).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += t.len() - hit;
    }
    Ok(Metrics::from_counts(tp, fp, fn_, 0, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> MeanSd {
    if values.is_empty() {
        return MeanSd { mean: 0.0, sd: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanSd { mean, sd: var.sqrt() }
}

/// Train/test index sets of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded window-random split with `test_fraction` of windows held out.
pub fn split_standard(n: usize, test_fraction: f64, seed: u64) -> Result<Fold> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two windows to split".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Fold { name: "standard".into(), train, test })
}

fn fold_by_keys(keys: &[&str], groups: Vec<Vec<String>>) -> Vec<Fold> {
    groups
        .into_iter()
        .map(|g| {
            let held: BTreeSet<&str> = g.iter().map(String::as_str).collect();
            let (test, train): (Vec<usize>, Vec<usize>) = (0..keys.len()).partition(|&i| held.contains(keys[i]));
            Fold { name: g.join("+"), train, test }
        })
        .collect()
}

/// Leave-one-user-out folds, ordered by user id.
pub fn split_cross_user(windows: &[ContextWindow]) -> Result<Vec<Fold>> {
    let keys: Vec<&str> = windows.iter().map(|w| w.user_id.as_str()).collect();
    let users: BTreeSet<&str> = keys.iter().copied().collect();
    if users.len() < 2 {
        return Err(Error::InvalidArgument(format!("cross-user split needs >= 2 users, found {}", users.len())));
    }
    Ok(fold_by_keys(&keys, users.into_iter().map(|u| vec![u.to_string()]).collect()))
}

/// Folds holding out `group_size` documents each; documents are shuffled
/// with `seed` before grouping.
pub fn split_cross_document(windows: &[ContextWindow], group_size: usize, seed: u64) -> Result<Vec<Fold>> {
    let keys: Vec<&str> = windows.iter().map(|w| w.doc_id.as_str()).collect();
    let mut docs: Vec<&str> = keys.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if group_size == 0 || docs.len() < group_size {
        return Err(Error::InvalidArgument(format!("{} documents cannot form groups of {group_size}", docs.len())));
    }
    if !docs.len().is_multiple_of(group_size) {
        return Err(Error::InvalidArgument(format!(
            "{} documents do not divide into groups of {group_size}",
            docs.len()
        )));
    }
    docs.shuffle(&mut rng(seed));
    let groups = docs.chunks(group_size).map(|c| {
        let mut g: Vec<String> = c.iter().map(|s| s.to_string()).collect();
        g.sort();
        g
    });
    Ok(fold_by_keys(&keys, groups.collect()))
}

/// `|A ∩ B| / |A ∪ B|`, with two empty sets counted as identical.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn jaccard_matrix<T: Ord>(sets: &[BTreeSet<T>]) -> Vec<Vec<f64>> {
    let n = sets.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = jaccard(&sets[i], &sets[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Mean of the entries above the diagonal; 1.0 for fewer than two sets.
pub fn mean_off_diagonal(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n < 2 {
        return 1.0;
    }
    let sum: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i][j]).sum();
    sum / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    None,
    Context,
    Gaze,
    Knowledge,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "context" => Ok(Ablation::Context),
            "gaze" => Ok(Ablation::Gaze),
            "knowledge" => Ok(Ablation::Knowledge),
            other => Err(Error::InvalidArgument(format!("unknown feature block {other:?}"))),
        }
    }
}

impl Ablation {
    /// Published F1 of the ablated variant.
    pub fn reference_f1(self) -> f64 {
        match self {
            Ablation::None => reference::BEST_F1,
            Ablation::Context => reference::NO_CONTEXT_F1,
            Ablation::Gaze => reference::NO_GAZE_F1,
            Ablation::Knowledge => reference::NO_KNOWLEDGE_F1,
        }
    }
}

/// Drops one feature block (and its encoder) from the classifier input.
pub fn ablate(cfg: &ModelConfig, drop: Ablation) -> Result<ModelConfig> {
    cfg.validate()?;
    let b = cfg.blocks;
    let blocks = match drop {
        Ablation::None => b,
        Ablation::Context => FeatureBlocks { context: false, ..b },
        Ablation::Gaze => FeatureBlocks { gaze: false, ..b },
        Ablation::Knowledge => FeatureBlocks { knowledge: false, ..b },
    };
    let out = ModelConfig { blocks, ..cfg.clone() };
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub ablation: Ablation,
    pub config_fingerprint: String,
    pub seed: u64,
    /// Means over folds.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub token_accuracy: f64,
    pub precision_sd: f64,
    pub recall_sd: f64,
    pub f1_sd: f64,
    pub token_accuracy_sd: f64,
    pub folds: Vec<FoldReport>,
    pub reference_f1: f64,
}

impl EvalReport {
    pub fn from_folds(
        protocol: Protocol,
        ablation: Ablation,
        cfg: &ModelConfig,
        seed: u64,
        folds: Vec<FoldReport>,
    ) -> EvalReport {
        let col = |f: fn(&Metrics) -> f64| mean_sd(&folds.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
        let (p, r, f, a) = (col(|m| m.precision), col(|m| m.recall), col(|m| m.f1), col(|m| m.token_accuracy));
        let reference_f1 = match protocol {
            Protocol::Standard => ablation.reference_f1(),
            Protocol::CrossUser => reference::CROSS_USER_F1.0,
            Protocol::CrossDoc => reference::CROSS_DOC_F1.0,
        };
        EvalReport {
            protocol,
            ablation,
            config_fingerprint: cfg.fingerprint(),
            seed,
            precision: p.mean,
            recall: r.mean,
            f1: f.mean,
            token_accuracy: a.mean,
            precision_sd: p.sd,
            recall_sd: r.sd,
            f1_sd: f.sd,
            token_accuracy_sd: a.sd,
            folds,
            reference_f1,
        }
    }
}

#[cfg(test)]
mod tests;
