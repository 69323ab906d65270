use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::model::fixtures::random_window;

fn set(xs: &[usize]) -> BTreeSet<usize> {
    xs.iter().copied().collect()
}

#[test]
fn perfect_predictions_score_100() {
    let t = vec![set(&[1, 2]), set(&[]), set(&[5])];
    let m = metrics(&t, &t).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (100.0, 100.0, 100.0));
}

#[test]
fn hand_counted_case() {
    // TP 2, FP 1, FN 1
    let pred = vec![set(&[1, 2]), set(&[7])];
    let truth = vec![set(&[1]), set(&[7, 8])];
    let m = metrics(&pred, &truth).unwrap();
    assert_eq!((m.tp, m.fp, m.fn_), (2, 1, 1));
    assert!((m.precision - 66.67).abs() < 0.01);
    assert!((m.recall - 66.67).abs() < 0.01);
    assert!((m.f1 - 66.67).abs() < 0.01);
}

#[test]
fn metric_errors() {
    assert!(metrics(&[], &[]).is_err());
    assert!(metrics(&[set(&[])], &[]).is_err());
    let m = metrics(&[set(&[])], &[set(&[])]).unwrap();
    assert_eq!(m.f1, 0.0);
}

proptest! {
    #[test]
    fn metrics_permutation_invariant_and_harmonic(
        pairs in prop::collection::vec((prop::collection::btree_set(0usize..6, 0..4), prop::collection::btree_set(0usize..6, 0..4)), 1..20),
        rot in 0usize..20,
    ) {
        let (p, t): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let a = metrics(&p, &t).unwrap();
        let k = rot % p.len();
        let (mut p2, mut t2) = (p.clone(), t.clone());
        p2.rotate_left(k);
        t2.rotate_left(k);
        prop_assert_eq!(a, metrics(&p2, &t2).unwrap());
        if a.precision > 0.0 && a.recall > 0.0 {
            prop_assert!((a.f1 - 2.0 * a.precision * a.recall / (a.precision + a.recall)).abs() < 1e-9);
        }
        prop_assert!((0.0..=100.0).contains(&a.precision) && (0.0..=100.0).contains(&a.recall));
    }
}

#[test]
fn mean_sd_by_hand() {
    let m = mean_sd(&[60.0, 70.0, 80.0]);
    assert!((m.mean - 70.0).abs() < 1e-12);
    // population SD: sqrt((100 + 0 + 100) / 3)
    assert!((m.sd - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

fn tagged(users: &[&str], docs: &[&str]) -> Vec<crate::align::ContextWindow> {
    let cfg = crate::model::ModelConfig::default();
    users
        .iter()
        .zip(docs)
        .enumerate()
        .map(|(i, (u, d))| {
            let mut w = random_window(&cfg, 2, i as u64);
            w.user_id = u.to_string();
            w.doc_id = d.to_string();
            w
        })
        .collect()
}

fn assert_partition(folds: &[Fold], n: usize) {
    let mut seen = vec![0; n];
    for f in folds {
        for &i in &f.test {
            seen[i] += 1;
        }
        let tr: BTreeSet<usize> = f.train.iter().copied().collect();
        assert!(f.test.iter().all(|i| !tr.contains(i)));
        assert_eq!(f.train.len() + f.test.len(), n);
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn cross_user_folds() {
    let ws = tagged(&["a", "b", "a", "b", "b"], &["d"; 5]);
    let folds = split_cross_user(&ws).unwrap();
    assert_eq!(folds.len(), 2);
    assert_eq!(folds[0].test, vec![0, 2]);
    assert_eq!(folds[1].test, vec![1, 3, 4]);
    assert_partition(&folds, 5);
    assert!(split_cross_user(&tagged(&["a", "a"], &["d", "d"])).is_err());
}

#[test]
fn cross_user_twelve_folds_without_leakage() {
    let users: Vec<String> = (0..60).map(|i| format!("u{}", i % 12)).collect();
    let names: Vec<&str> = users.iter().map(String::as_str).collect();
    let ws = tagged(&names, &["d"; 60]);
    let folds = split_cross_user(&ws).unwrap();
    assert_eq!(folds.len(), 12);
    assert_partition(&folds, 60);
    for f in &folds {
        let test: BTreeSet<&str> = f.test.iter().map(|&i| ws[i].user_id.as_str()).collect();
        assert!(f.train.iter().all(|&i| !test.contains(ws[i].user_id.as_str())));
    }
}

#[test]
fn cross_document_folds() {
    let docs: Vec<String> = (0..72).map(|i| format!("doc{:02}", i % 36)).collect();
    let names: Vec<&str> = docs.iter().map(String::as_str).collect();
    let ws = tagged(&vec!["u"; 72], &names);
    let folds = split_cross_document(&ws, 3, 7).unwrap();
    assert_eq!(folds.len(), 12);
    assert_partition(&folds, 72);
    for f in &folds {
        let test: BTreeSet<&str> = f.test.iter().map(|&i| ws[i].doc_id.as_str()).collect();
        assert_eq!(test.len(), 3);
        assert!(f.train.iter().all(|&i| !test.contains(ws[i].doc_id.as_str())));
    }
    assert_eq!(folds, split_cross_document(&ws, 3, 7).unwrap());
    assert_eq!(split_cross_document(&tagged(&["u"; 3], &["a", "b", "c"]), 3, 0).unwrap().len(), 1);
    assert!(split_cross_document(&tagged(&["u"; 2], &["a", "b"]), 3, 0).is_err());
    assert!(split_cross_document(&tagged(&["u"; 4], &["a", "b", "c", "d"]), 3, 0).is_err());
}

#[test]
fn standard_split() {
    let f = split_standard(100, 0.2, 3).unwrap();
    assert_eq!(f.test.len(), 20);
    let mut all: Vec<usize> = f.train.iter().chain(&f.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert_eq!(f, split_standard(100, 0.2, 3).unwrap());
    assert_ne!(f, split_standard(100, 0.2, 4).unwrap());
}

#[test]
fn jaccard_examples() {
    let a: BTreeSet<&str> = ["a", "b"].into();
    let b: BTreeSet<&str> = ["b", "c"].into();
    assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(jaccard(&a, &a), 1.0);
    assert_eq!(jaccard::<u8>(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    let m = jaccard_matrix(&[a.clone(), b.clone(), a]);
    assert_eq!(m[0][2], 1.0);
    assert_eq!(m[1][0], m[0][1]);
    assert!((mean_off_diagonal(&m) - (1.0 / 3.0 + 1.0 + 1.0 / 3.0) / 3.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn jaccard_matches_set_arithmetic(sets in prop::collection::vec(prop::collection::btree_set(0u8..12, 0..8), 1..6)) {
        let m = jaccard_matrix(&sets);
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                let (mut inter, mut union) = (0, 0);
                for x in 0u8..12 {
                    let (a, b) = (sets[i].contains(&x), sets[j].contains(&x));
                    inter += usize::from(a && b);
                    union += usize::from(a || b);
                }
                let expect = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
                prop_assert_eq!(m[i][j], expect);
            }
        }
    }
}

#[test]
fn ablation_widths_and_references() {
    let base = crate::model::ModelConfig { n_gaze: 20, dim: 64, n_k: 32, ..Default::default() };
    assert_eq!(ablate(&base, Ablation::Gaze).unwrap().classifier_width(), 96);
    assert_eq!(ablate(&base, Ablation::Context).unwrap().classifier_width(), 52);
    assert_eq!(ablate(&base, Ablation::Knowledge).unwrap().classifier_width(), 84);
    assert_eq!(ablate(&base, Ablation::None).unwrap(), base);
    assert_eq!(Ablation::Context.reference_f1(), 10.00);
    assert_eq!(Ablation::Gaze.reference_f1(), 75.59);
    assert_eq!(Ablation::Knowledge.reference_f1(), 74.93);
    assert!("bogus".parse::<Ablation>().is_err());
}

#[test]
fn report_aggregates_folds() {
    let cfg = crate::model::ModelConfig::default();
    let folds: Vec<FoldReport> = [(50.0, 60.0), (70.0, 80.0), (60.0, 70.0)]
        .iter()
        .enumerate()
        .map(|(i, &(p, r))| FoldReport {
            name: format!("f{i}"),
            n_train: 10,
            n_test: 5,
            metrics: Metrics { precision: p, recall: r, f1: 2.0 * p * r / (p + r), token_accuracy: 90.0, tp: 0, fp: 0, fn_: 0 },
        })
        .collect();
    let rep = EvalReport::from_folds(Protocol::CrossUser, Ablation::None, &cfg, 1, folds);
    assert!((rep.precision - 60.0).abs() < 1e-12);
    assert!((rep.precision_sd - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(rep.token_accuracy_sd, 0.0);
    assert_eq!(rep.config_fingerprint, cfg.fingerprint());
}
