use gazereader::corpus::Vocab;
use gazereader::eval::evaluate;
use gazereader::model::{train, Checkpoint, ModelConfig, TrainOptions};
use gazereader::pipeline::{align_config_for, flagged, prepare_corpus, prepare_corpus_dir, Scorer};
use gazereader::synth::{dwell_baseline, make_corpus, read_corpus_dir, SynthConfig};

fn small_model() -> ModelConfig {
    ModelConfig { n_p: 4, n_k: 4, dim: 8, layers: 1, heads: 1, ffn_dim: 8, epochs: 1, lr_encoder: 1e-3, ..ModelConfig::default() }
}

#[test]
fn corpus_on_disk_gives_the_same_dataset() {
    let corpus = make_corpus(&SynthConfig { n_docs: 4, n_readers: 3, seed: 2, ..SynthConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.write_to(dir.path()).unwrap();
    let cfg = align_config_for(&small_model(), 1);
    let from_memory = prepare_corpus(&corpus, Vocab::default_vocab(), &cfg).unwrap().windows(&cfg).unwrap();
    let disk = read_corpus_dir(dir.path()).unwrap();
    let from_disk = prepare_corpus_dir(&disk, Vocab::default_vocab(), &cfg).unwrap().windows(&cfg).unwrap();
    assert_eq!(from_memory.len(), from_disk.len());
    let key = |w: &gazereader::ContextWindow| (w.session_id.clone(), w.anchor_word, w.is_negative, w.token_slice.clone());
    let mut a: Vec<_> = from_memory.iter().map(key).collect();
    let mut b: Vec<_> = from_disk.iter().map(key).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_scores_match_the_trained_detector() {
    let corpus = make_corpus(&SynthConfig { n_docs: 3, n_readers: 3, seed: 9, ..SynthConfig::default() }).unwrap();
    let cfg = small_model();
    let acfg = align_config_for(&cfg, 0);
    let prep = prepare_corpus(&corpus, Vocab::default_vocab(), &acfg).unwrap();
    let windows = prep.windows(&acfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = TrainOptions { checkpoint_dir: Some(dir.path().to_path_buf()), frequency: Some(prep.table.clone()), ..TrainOptions::default() };
    let out = train(&cfg, &windows, &opts).unwrap();

    let ckpt = Checkpoint::load(&dir.path().join("epoch-1.json")).unwrap();
    let restored = ckpt.detector().unwrap();
    assert_eq!(evaluate(&restored, &windows).unwrap(), evaluate(&out.detector, &windows).unwrap());

    let scorer = Scorer::from_checkpoint(&ckpt).unwrap();
    let s = &corpus.sessions[0];
    let doc = corpus.docs.iter().find(|d| d.doc_id == s.doc_id).unwrap();
    let scores = scorer.score_session(&s.session_id, &s.user_id, doc, &s.raw).unwrap();
    assert!(!scores.is_empty());
    let hits = flagged(&scores, scorer.threshold());
    assert!(hits.iter().all(|w| w.score >= scorer.threshold() && doc.words[w.word].text == w.text));
}

#[test]
fn planted_words_recoverable_from_noiseless_dwell() {
    let corpus = make_corpus(&SynthConfig { n_docs: 4, n_readers: 4, noise_sigma_px: 0.0, dwell_multiplier_unknown: 2.0, seed: 3, ..SynthConfig::default() }).unwrap();
    let mut planted = 0;
    for s in &corpus.sessions {
        let doc = corpus.docs.iter().find(|d| d.doc_id == s.doc_id).unwrap();
        let profile = corpus.profiles.iter().find(|p| p.reader_id == s.user_id).unwrap();
        let found = dwell_baseline(doc, &s.raw, profile);
        assert!(s.marked_words.is_subset(&found), "session {}", s.session_id);
        planted += s.marked_words.len();
    }
    assert!(planted > 0);
}
