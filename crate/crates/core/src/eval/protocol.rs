use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ablate, metrics, split_cross_document, split_cross_user, split_standard, Ablation, EvalReport, Fold, FoldReport, Metrics};
use crate::align::ContextWindow;
use crate::error::{Error, Result};
use crate::model::{flag_words, train, Detector, ModelConfig, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Seeded window-random 80/20 split.
    Standard,
    /// Leave one user out.
    CrossUser,
    /// Hold out documents in groups.
    CrossDoc,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "cross-user" => Ok(Protocol::CrossUser),
            "cross-doc" => Ok(Protocol::CrossDoc),
            other => Err(Error::InvalidArgument(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub protocol: Protocol,
    pub ablation: Ablation,
    pub seed: u64,
    pub test_fraction: f64,
    pub group_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { protocol: Protocol::Standard, ablation: Ablation::None, seed: 0, test_fraction: 0.2, group_size: 3 }
    }
}

/// Word-level scores and token accuracy of `det` over `windows`.
pub fn evaluate(det: &Detector, windows: &[ContextWindow]) -> Result<Metrics> {
    let mut predicted = Vec::with_capacity(windows.len());
    let mut truth = Vec::with_capacity(windows.len());
    let (mut correct, mut total) = (0, 0);
    for w in windows {
        let a = det.scores(w)?;
        for (s, &l) in a.iter().zip(&w.token_labels) {
            correct += usize::from((*s >= det.config.threshold) == (l == 1));
            total += 1;
        }
        predicted.push(flag_words(&a, &w.token_words, det.config.threshold));
        truth.push(w.truth_words());
    }
    let m = metrics(&predicted, &truth)?;
    Ok(Metrics::from_counts(m.tp, m.fp, m.fn_, correct, total))
}

pub fn folds(windows: &[ContextWindow], opts: &EvalOptions) -> Result<Vec<Fold>> {
    match opts.protocol {
        Protocol::Standard => Ok(vec![split_standard(windows.len(), opts.test_fraction, opts.seed)?]),
        Protocol::CrossUser => split_cross_user(windows),
        Protocol::CrossDoc => split_cross_document(windows, opts.group_size, opts.seed),
    }
}

/// Trains and scores one model per fold.
pub fn run_protocol(
    cfg: &ModelConfig,
    windows: &[ContextWindow],
    opts: &EvalOptions,
    train_opts: &TrainOptions,
) -> Result<EvalReport> {
    let cfg = ablate(cfg, opts.ablation)?;
    let mut reports = Vec::new();
    for fold in folds(windows, opts)? {
        let train_set: Vec<ContextWindow> = fold.train.iter().map(|&i| windows[i].clone()).collect();
        let test_set: Vec<ContextWindow> = fold.test.iter().map(|&i| windows[i].clone()).collect();
        let leaked: BTreeSet<&str> = match opts.protocol {
            Protocol::Standard => BTreeSet::new(),
            Protocol::CrossUser => keys(&train_set, |w| &w.user_id).intersection(&keys(&test_set, |w| &w.user_id)).copied().collect(),
            Protocol::CrossDoc => keys(&train_set, |w| &w.doc_id).intersection(&keys(&test_set, |w| &w.doc_id)).copied().collect(),
        };
        if !leaked.is_empty() {
            return Err(Error::InvalidArgument(format!("fold {} leaks {leaked:?}", fold.name)));
        }
        let out = train(&cfg, &train_set, train_opts)?;
        let m = evaluate(&out.detector, &test_set)?;
        log::info!("fold {}: P {:.2} R {:.2} F1 {:.2}", fold.name, m.precision, m.recall, m.f1);
        reports.push(FoldReport { name: fold.name, n_train: train_set.len(), n_test: test_set.len(), metrics: m });
    }
    Ok(EvalReport::from_folds(opts.protocol, opts.ablation, &cfg, opts.seed, reports))
}

fn keys<'a>(ws: &'a [ContextWindow], f: impl Fn(&'a ContextWindow) -> &'a String) -> BTreeSet<&'a str> {
    ws.iter().map(|w| f(w).as_str()).collect()
}
