use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gazereader::align::write_dataset;
use gazereader::corpus::{load_document, train_vocab};
use gazereader::eval::{run_protocol, Ablation, EvalOptions, Protocol};
use gazereader::gaze::{condition, read_trace, write_trace, DEFAULT_RATE_HZ, DEFAULT_SMOOTH_WINDOW};
use gazereader::model::{train, Checkpoint, ModelConfig, TrainOptions};
use gazereader::pipeline::{align_config_for, attach_features, flagged, prepare_corpus_dir, Featurizer, Scorer};
use gazereader::synth::{make_corpus, read_corpus_dir, DiscriminableConfig, SynthConfig};
use gazereader::util::{read_json, read_jsonl, write_json};
use gazereader::{AlignConfig, ContextWindow, FrequencyTable, Vocab};
use gazereader_service::{serve, ServiceConfig};

#[derive(Parser)]
#[command(name = "gazereader", version, about = "Detect unknown words from webcam gaze while reading")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Smooth and resample a raw gaze trace.
    Preprocess {
        /// Raw trace (JSON lines).
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SMOOTH_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
    },
    /// Build a labelled window dataset from a corpus directory.
    Align {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Vocabulary file; the built-in one when omitted. Pass the same file to `train`.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 1000.0)]
        context_ms: f64,
        #[arg(long, default_value_t = 1)]
        neg_ratio: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Attach knowledge features to every window of a dataset.
    Features {
        dataset: PathBuf,
        #[arg(long)]
        freq_table: PathBuf,
        /// Corpus directory holding the documents the windows come from.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Output dataset; rewrites the input when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the detector, writing one checkpoint per epoch.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Frequency table to embed in checkpoints; defaults to `<data>.freq.json`.
        #[arg(long)]
        frequency: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Score one recorded session with a checkpoint.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        /// Raw gaze trace (JSON lines).
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        doc: PathBuf,
        /// Print every word's score, not only the flagged ones.
        #[arg(long)]
        all: bool,
    },
    /// Train and evaluate under a split protocol.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "standard")]
        protocol: Protocol,
        #[arg(long, default_value = "none")]
        ablate: Ablation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted unknown words.
    Synth {
        #[arg(long, default_value_t = 36)]
        docs: usize,
        #[arg(long, default_value_t = 12)]
        readers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add distractor words that only gaze can tell apart.
        #[arg(long)]
        discriminable: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a sub-word vocabulary from corpus word counts.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8000)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the reading-session HTTP service.
    Serve {
        /// JSON config; `GAZEREADER_*` environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model config JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelConfig> {
        let mut cfg: ModelConfig = match &self.config {
            Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
            None => ModelConfig::default(),
        };
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_vocab(path: Option<&Path>) -> Result<Vocab> {
    Ok(match path {
        Some(p) => Vocab::load(p)?,
        None => Vocab::default_vocab().clone(),
    })
}

fn freq_path(data: &Path) -> PathBuf {
    data.with_extension("freq.json")
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Preprocess { input, output, window, rate } => {
            let raw = read_trace(&input)?;
            let cond = condition(&raw, window, rate)?;
            write_trace(&output, &cond)?;
            eprintln!("{} raw samples -> {} at {rate} Hz", raw.len(), cond.len());
        }
        Cmd::Align { corpus, out, model, vocab, context_ms, neg_ratio, seed } => {
            let cfg = model.load()?;
            let acfg = AlignConfig { context_ms, neg_ratio, ..align_config_for(&cfg, seed) };
            let dir = read_corpus_dir(&corpus)?;
            let prep = prepare_corpus_dir(&dir, &load_vocab(vocab.as_deref())?, &acfg)?;
            let windows = prep.windows(&acfg)?;
            write_dataset(&out, &windows)?;
            write_json(&freq_path(&out), &prep.table)?;
            eprintln!("{} windows from {} sessions -> {}", windows.len(), prep.sessions.len(), out.display());
        }
        Cmd::Features { dataset, freq_table, corpus, vocab, out } => {
            let table: FrequencyTable = read_json(&freq_table).with_context(|| format!("reading {}", freq_table.display()))?;
            let feat = Featurizer::new(load_vocab(vocab.as_deref())?, table);
            let docs: BTreeMap<_, _> = read_corpus_dir(&corpus)?.docs.into_iter().map(|(id, d)| (id, feat.align(d))).collect();
            let mut windows: Vec<ContextWindow> = read_jsonl(&dataset)?;
            attach_features(&mut windows, &docs)?;
            let out = out.unwrap_or(dataset);
            write_dataset(&out, &windows)?;
            eprintln!("{} windows featurized -> {}", windows.len(), out.display());
        }
        Cmd::Train { model, data, out, frequency, vocab } => {
            let cfg = model.load()?;
            let windows: Vec<ContextWindow> = read_jsonl(&data)?;
            let freq = frequency.unwrap_or_else(|| freq_path(&data));
            let opts = TrainOptions {
                checkpoint_dir: Some(out.clone()),
                frequency: freq.exists().then(|| read_json(&freq)).transpose()?,
                vocab: vocab.as_deref().map(Vocab::load).transpose()?,
                ..TrainOptions::default()
            };
            let res = train(&cfg, &windows, &opts)?;
            for e in &res.epochs {
                eprintln!("epoch {} loss {:.4} ({:.1} s)", e.epoch, e.mean_loss, e.seconds);
            }
            eprintln!("checkpoints in {}", out.display());
        }
        Cmd::Predict { ckpt, session, doc, all } => {
            let ckpt = Checkpoint::load(&ckpt)?;
            let scorer = Scorer::from_checkpoint(&ckpt)?;
            let layout = load_document(&doc)?;
            let raw = read_trace(&session)?;
            let scores = scorer.score_session(&raw.session_id, "", &layout, &raw)?;
            print_json(&if all { scores } else { flagged(&scores, scorer.threshold()) })?;
        }
        Cmd::Eval { model, data, protocol, ablate, seed, out } => {
            let cfg = model.load()?;
            let windows: Vec<ContextWindow> = read_jsonl(&data)?;
            let opts = EvalOptions { protocol, ablation: ablate, seed, ..EvalOptions::default() };
            let report = run_protocol(&cfg, &windows, &opts, &TrainOptions::default())?;
            match out {
                Some(p) => write_json(&p, &report)?,
                None => print_json(&report)?,
            }
            eprintln!("F1 {:.2} ± {:.2} over {} folds", report.f1, report.f1_sd, report.folds.len());
        }
        Cmd::Synth { docs, readers, seed, discriminable, out } => {
            let cfg = SynthConfig {
                n_docs: docs,
                n_readers: readers,
                seed,
                discriminable: discriminable.then(DiscriminableConfig::default),
                ..SynthConfig::default()
            };
            let corpus = make_corpus(&cfg)?;
            corpus.write_to(&out)?;
            eprintln!("{} documents, {} sessions -> {}", corpus.docs.len(), corpus.sessions.len(), out.display());
        }
        Cmd::Vocab { corpus, size, out } => {
            let dir = read_corpus_dir(&corpus)?;
            let mut counts = std::collections::BTreeMap::new();
            for d in dir.docs.values() {
                for w in &d.words {
                    *counts.entry(w.text.clone()).or_insert(0u64) += 1;
                }
            }
            let vocab = train_vocab(&counts, size)?;
            std::fs::write(&out, vocab.to_file_string())?;
            eprintln!("{} entries -> {}", vocab.len(), out.display());
        }
        Cmd::Serve { config } => {
            let cfg = ServiceConfig::load(config.as_deref())?;
            if cfg.checkpoint.is_none() {
                eprintln!("no checkpoint configured; sessions can be recorded but not scored");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
