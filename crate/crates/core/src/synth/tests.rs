use std::collections::BTreeSet;

use super::*;
use crate::knowledge::FrequencyTable;

fn small_doc(n: usize) -> DocumentLayout {
    let bank = WordBank::standard();
    let texts: Vec<String> = (0..n).map(|i| bank.words[(i * 37) % bank.len()].text.clone()).collect();
    layout_words("d", &texts).unwrap()
}

#[test]
fn noiseless_samples_sit_on_box_centers() {
    let doc = small_doc(60);
    let p = ReaderProfile { noise_sigma_px: 0.0, ..ReaderProfile::new("r", BTreeSet::new()) };
    let s = simulate_session(&doc, &p, "s", 3).unwrap();
    let centers: Vec<(f64, f64)> = doc.words.iter().map(|b| (b.x, b.y)).collect();
    assert!(s.raw.samples.len() > 100);
    assert!(s.raw.samples.iter().all(|g| centers.contains(&(g.x, g.y))));
    assert!(s.marked_words.is_empty());
    assert!(s.visits.iter().all(|v| !v.regression));
}

#[test]
fn sessions_are_deterministic() {
    let doc = small_doc(40);
    let unknown: BTreeSet<String> = [normalize_word(&doc.words[5].text)].into();
    let p = ReaderProfile::new("r", unknown);
    let a = simulate_session(&doc, &p, "s", 11).unwrap();
    assert_eq!(a, simulate_session(&doc, &p, "s", 11).unwrap());
    assert_ne!(a.raw, simulate_session(&doc, &p, "s", 12).unwrap().raw);
    assert!(a.marked_words.contains(&5));
    let ser = serde_json::to_string(&a).unwrap();
    assert_eq!(ser, serde_json::to_string(&simulate_session(&doc, &p, "s", 11).unwrap()).unwrap());
}

#[test]
fn unknown_words_collect_multiplied_samples() {
    let doc = small_doc(80);
    let unknown: BTreeSet<String> = doc.words.iter().step_by(8).map(|w| normalize_word(&w.text)).collect();
    let p = ReaderProfile::new("r", unknown);
    let (mut unk, mut known) = ((0.0, 0usize), (0.0, 0usize));
    for seed in 0..100 {
        let s = simulate_session(&doc, &p, "s", seed).unwrap();
        for v in s.visits.iter().filter(|v| !v.regression) {
            let n = s.raw.samples.iter().filter(|g| g.t >= v.start && g.t < v.end).count() as f64;
            if s.marked_words.contains(&v.word) {
                unk = (unk.0 + n, unk.1 + 1);
            } else {
                known = (known.0 + n, known.1 + 1);
            }
        }
    }
    let ratio = (unk.0 / unk.1 as f64) / (known.0 / known.1 as f64);
    assert!((ratio / 2.5 - 1.0).abs() < 0.10, "ratio {ratio}");
}

#[test]
fn dwell_baseline_recovers_planted_words_without_noise() {
    let doc = small_doc(120);
    for multiplier in [2.0, 2.5, 4.0] {
        let unknown: BTreeSet<String> = doc.words.iter().skip(3).step_by(11).map(|w| normalize_word(&w.text)).collect();
        let p = ReaderProfile {
            noise_sigma_px: 0.0,
            dwell_multiplier_unknown: multiplier,
            ..ReaderProfile::new("r", unknown)
        };
        for seed in 0..20 {
            let s = simulate_session(&doc, &p, "s", seed).unwrap();
            let flagged = dwell_baseline(&doc, &s.raw, &p);
            assert!(s.marked_words.is_subset(&flagged), "multiplier {multiplier} seed {seed}");
        }
    }
}

#[test]
fn profile_validation() {
    let p = ReaderProfile::new("r", BTreeSet::new());
    assert!(ReaderProfile { dwell_multiplier_unknown: 1.0, ..p.clone() }.validate().is_err());
    assert!(ReaderProfile { p_regression: 1.5, ..p.clone() }.validate().is_err());
    assert!(ReaderProfile { noise_sigma_px: -1.0, ..p.clone() }.validate().is_err());
    assert!(simulate_session(&layout_words("e", &[]).unwrap(), &p, "s", 0).is_err());
}

#[test]
fn layout_wraps_inside_margins() {
    let texts: Vec<String> = (0..200).map(|i| "w".repeat(1 + i % 9)).collect();
    let doc = layout_words("d", &texts).unwrap();
    assert!(doc.words.iter().all(|b| b.x - b.w / 2.0 >= MARGIN && b.x + b.w / 2.0 <= SCREEN_WIDTH - MARGIN));
    assert!(doc.words.last().unwrap().y > MARGIN);
}

#[test]
fn default_corpus_scale_and_jaccard_band() {
    let c = make_corpus(&SynthConfig::default()).unwrap();
    assert_eq!(c.docs.len(), 36);
    assert_eq!(c.profiles.len(), 12);
    assert_eq!(c.sessions.len(), 432);
    let j = profile_jaccard(&c.profiles);
    assert!((0.15..=0.35).contains(&j), "mean Jaccard {j}");
    // truth is the profile intersected with the document vocabulary
    for s in c.sessions.iter().take(24) {
        let doc = c.docs.iter().find(|d| d.doc_id == s.doc_id).unwrap();
        let p = c.profiles.iter().find(|p| p.reader_id == s.user_id).unwrap();
        let expect: BTreeSet<usize> = (0..doc.len()).filter(|&w| !p.knows(&doc.words[w].text)).collect();
        assert_eq!(s.marked_words, expect);
        assert!(p.unknown_vocab.is_subset(&c.pool));
    }
}

#[test]
fn tiny_corpus() {
    let cfg = SynthConfig { n_docs: 1, n_readers: 1, words_per_doc: 50, ..Default::default() };
    let c = make_corpus(&cfg).unwrap();
    assert_eq!(c.sessions.len(), 1);
}

#[test]
fn impossible_band_is_infeasible() {
    let cfg = SynthConfig { n_docs: 2, n_readers: 4, words_per_doc: 80, jaccard_band: (0.9, 1.0), max_attempts: 3, ..Default::default() };
    assert!(matches!(make_corpus(&cfg), Err(Error::Infeasible(_))));
}

#[test]
fn discriminable_pool_is_text_indistinguishable() {
    let d = DiscriminableConfig { words: 12, occurrences: 5 };
    let cfg = SynthConfig { n_docs: 6, n_readers: 6, words_per_doc: 200, discriminable: Some(d), ..Default::default() };
    let c = make_corpus(&cfg).unwrap();
    assert_eq!(c.pool.len(), 12);
    let table = FrequencyTable::from_docs(&c.docs).unwrap();
    let pos = crate::knowledge::LexiconTagger::default_tagger();
    for w in &c.pool {
        assert_eq!(table.count(w), 5);
        assert_eq!(pos.tag_word(w), crate::knowledge::PosTag::Noun);
        let holders = c.profiles.iter().filter(|p| p.unknown_vocab.contains(w)).count();
        assert_eq!(holders, 3);
    }
}

#[test]
fn corpus_directory_round_trip() {
    let cfg = SynthConfig { n_docs: 2, n_readers: 2, words_per_doc: 60, ..Default::default() };
    let c = make_corpus(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    c.write_to(dir.path()).unwrap();
    let back = read_corpus_dir(dir.path()).unwrap();
    assert_eq!(back.docs.len(), 2);
    assert_eq!(back.sessions.len(), 4);
    assert_eq!(back.profiles, c.profiles);
    for ((meta, raw), s) in back.sessions.iter().zip(&c.sessions) {
        assert_eq!(meta, &s.meta());
        assert_eq!(raw.samples, s.raw.samples);
    }
}
