use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gazereader::align::AlignConfig;
use gazereader::corpus::{tokenize, Vocab};
use gazereader::gaze::{condition, DEFAULT_RATE_HZ, DEFAULT_SMOOTH_WINDOW};
use gazereader::model::{Detector, ModelConfig};
use gazereader::pipeline::prepare_corpus;
use gazereader::synth::{make_corpus, SynthConfig, SynthCorpus};

fn corpus() -> SynthCorpus {
    make_corpus(&SynthConfig { n_docs: 4, n_readers: 2, ..SynthConfig::default() }).unwrap()
}

fn conditioning(c: &mut Criterion) {
    let corpus = corpus();
    let raw = &corpus.sessions[0].raw;
    c.bench_function("condition_session", |b| b.iter(|| condition(black_box(raw), DEFAULT_SMOOTH_WINDOW, DEFAULT_RATE_HZ).unwrap()));
}

fn tokenizing(c: &mut Criterion) {
    let corpus = corpus();
    let vocab = Vocab::default_vocab();
    c.bench_function("tokenize_document", |b| b.iter(|| tokenize(black_box(&corpus.docs[0]), vocab)));
}

fn detector(c: &mut Criterion) {
    let corpus = corpus();
    let cfg = AlignConfig::default();
    let windows = prepare_corpus(&corpus, Vocab::default_vocab(), &cfg).unwrap().windows(&cfg).unwrap();
    let det = Detector::new(ModelConfig::default()).unwrap();
    let w = &windows[0];
    c.bench_function("forward_window", |b| b.iter(|| det.scores(black_box(w)).unwrap()));
    let batch: Vec<_> = windows.iter().take(16).collect();
    c.bench_function("grad_batch16", |b| b.iter_batched(|| batch.clone(), |bt| det.grad(&bt).unwrap(), BatchSize::SmallInput));
}

criterion_group!(benches, conditioning, tokenizing, detector);
criterion_main!(benches);
