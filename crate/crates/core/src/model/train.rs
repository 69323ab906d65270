use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::ModelConfig;
use super::embedding_file::EmbeddingStore;
use super::optim::Optimizer;
use super::Detector;
use crate::align::ContextWindow;
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::knowledge::FrequencyTable;
use crate::util::{rng, sub_seed};

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Writes `epoch-<n>.json` after every epoch when set.
    pub checkpoint_dir: Option<PathBuf>,
    pub frequency: Option<FrequencyTable>,
    pub vocab: Option<Vocab>,
    pub embeddings: Option<EmbeddingStore>,
    /// Starts from these weights instead of a fresh initialisation.
    pub init: Option<super::Parameters>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub detector: Detector,
    pub epochs: Vec<EpochStats>,
}

/// Mini-batch training with the two-group optimizer, deterministic in
/// `cfg.seed`.
pub fn train(cfg: &ModelConfig, data: &[ContextWindow], opts: &TrainOptions) -> Result<TrainOutput> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut det = match &opts.init {
        Some(p) => Detector::with_params(cfg.clone(), p.clone())?,
        None => Detector::new(cfg.clone())?,
    };
    det.embeddings = opts.embeddings.clone();
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut opt = Optimizer::new(&det.params, cfg.lr_encoder, cfg.lr_lstm);
    let mut grads = det.params.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut last_good = det.params.clone();
    let total_steps = cfg.epochs * data.len().div_ceil(cfg.batch_size);
    let mut global_step = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng(sub_seed(cfg.seed, epoch as u64)));
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&ContextWindow> = chunk.iter().map(|&i| &data[i]).collect();
            grads.zero();
            let diverged = |last_good: &super::Parameters| Error::Diverged {
                epoch,
                step,
                last_good: Box::new(last_good.clone()),
            };
            let loss = match det.accumulate_grad(&batch, &mut grads) {
                Ok(l) => l,
                Err(Error::NonFinite(_)) => return Err(diverged(&last_good)),
                Err(e) => return Err(e),
            };
            if !grads.is_finite() {
                return Err(diverged(&last_good));
            }
            opt.scale = cfg.lr_schedule.scale(global_step, total_steps);
            opt.step(&mut det.params, &grads);
            global_step += 1;
            if !det.params.is_finite() {
                return Err(diverged(&last_good));
            }
            total += loss * batch.len() as f64;
        }
        let stats = EpochStats { epoch, mean_loss: total / data.len() as f64, seconds: started.elapsed().as_secs_f64() };
        log::info!("epoch {epoch}: mean loss {:.4} ({:.1}s)", stats.mean_loss, stats.seconds);
        epochs.push(stats);
        last_good = det.params.clone();
        if let Some(dir) = &opts.checkpoint_dir {
            Checkpoint::new(&det, epoch, opts.frequency.as_ref(), opts.vocab.as_ref())
                .save(&dir.join(format!("epoch-{epoch}.json")))?;
        }
    }
    Ok(TrainOutput { detector: det, epochs })
}
