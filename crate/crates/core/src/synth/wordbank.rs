//! Fixed synthetic vocabulary with Zipf rank order.
//!
//! Content words are pronounceable syllable strings ending in a suffix the
//! bundled POS rules recognise; entities are capitalised and listed in the
//! bundled gazetteer. The bank does not depend on any corpus seed, so the
//! bundled vocabulary and gazetteer fit every generated corpus.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use rand::Rng as _;

use crate::knowledge::{NerTag, PosTag};
use crate::util::{rng, Rng};

const BANK_SEED: u64 = 0x6a7e_2e4d;
pub const CONTENT_WORDS: usize = 5000;
pub const ENTITY_WORDS: usize = 300;

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "it", "as", "was", "with", "be", "by",
    "on", "not", "he", "this", "are", "or", "his", "from", "at", "which", "but", "have", "an",
    "had", "they", "you", "were", "their", "one", "all", "we", "can", "her", "has", "there", "been",
    "if", "more", "when", "will", "would", "who", "so", "no", "she", "other", "its", "may", "these",
    "two", "some", "into", "than", "could", "them", "after", "also", "over", "only", "most",
    "between", "such", "through", "about", "many", "then", "our", "should", "because", "while",
    "each", "during", "under", "where", "very", "often", "those", "before", "still", "without",
    "against", "three", "how", "might", "us", "even", "both", "must", "among", "never", "now",
    "although", "why", "always", "across",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
    "br", "cr", "dr", "fl", "gr", "pl", "pr", "st", "tr", "sh", "ch", "th",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "s", "m", "t", "nd", "st"];

const NOUN_SUFFIXES: &[&str] = &["tion", "ment", "ness", "ship", "ance", "ity", "ism", "er"];
const VERB_SUFFIXES: &[&str] = &["ize", "ate", "ify", "ed", "ing"];
const ADJ_SUFFIXES: &[&str] = &["ous", "ive", "ful", "able", "al", "ic"];
const ADV_SUFFIXES: &[&str] = &["ly"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordClass {
    Function,
    Content,
    Entity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankWord {
    pub text: String,
    pub pos: PosTag,
    pub ner: NerTag,
    pub class: WordClass,
}

/// Words in Zipf rank order (index 0 is the most frequent).
#[derive(Debug, Clone)]
pub struct WordBank {
    pub words: Vec<BankWord>,
    cdf: Vec<f64>,
}

static STANDARD: OnceLock<WordBank> = OnceLock::new();

pub(crate) fn syllable(r: &mut Rng) -> String {
    format!(
        "{}{}{}",
        ONSETS[r.random_range(0..ONSETS.len())],
        VOWELS[r.random_range(0..VOWELS.len())],
        CODAS[r.random_range(0..CODAS.len())]
    )
}

fn pick<'a>(r: &mut Rng, xs: &[&'a str]) -> &'a str {
    xs[r.random_range(0..xs.len())]
}

impl WordBank {
    /// The bank used by the generator, the bundled vocabulary and gazetteer.
    pub fn standard() -> &'static WordBank {
        STANDARD.get_or_init(|| WordBank::generate(BANK_SEED, CONTENT_WORDS, ENTITY_WORDS, 1.0))
    }

    pub fn generate(seed: u64, n_content: usize, n_entities: usize, zipf_exponent: f64) -> WordBank {
        let mut r = rng(seed);
        let mut seen: HashSet<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
        let lexicon = crate::knowledge::LexiconTagger::default_tagger();
        let mut fresh = |r: &mut Rng, pos: PosTag, make: &dyn Fn(&mut Rng) -> String| loop {
            let w = make(r);
            if w.len() >= 4 && !seen.contains(&w.to_lowercase()) && lexicon.tag_word(&w) == pos {
                seen.insert(w.to_lowercase());
                return w;
            }
        };

        let mut tail = Vec::with_capacity(n_content + n_entities);
        for i in 0..n_content {
            let (pos, suffixes) = match i % 20 {
                0..=8 => (PosTag::Noun, NOUN_SUFFIXES),
                9..=13 => (PosTag::Verb, VERB_SUFFIXES),
                14..=17 => (PosTag::Adj, ADJ_SUFFIXES),
                _ => (PosTag::Adv, ADV_SUFFIXES),
            };
            let text = fresh(&mut r, pos, &|r| {
                let n = r.random_range(1..=2);
                let stem: String = (0..n).map(|_| syllable(r)).collect();
                format!("{stem}{}", pick(r, suffixes))
            });
            tail.push(BankWord { text, pos, ner: NerTag::O, class: WordClass::Content });
        }
        for i in 0..n_entities {
            let ner = [NerTag::Per, NerTag::Loc, NerTag::Org][i % 3];
            let text = fresh(&mut r, PosTag::Propn, &|r| {
                let n = r.random_range(2..=3);
                let s: String = (0..n).map(|_| syllable(r)).collect();
                let mut c = s.chars();
                let first = c.next().expect("non-empty syllable").to_ascii_uppercase();
                std::iter::once(first).chain(c).collect()
            });
            tail.push(BankWord { text, pos: PosTag::Propn, ner, class: WordClass::Entity });
        }
        // interleave classes along the rank axis
        for i in (1..tail.len()).rev() {
            let j = r.random_range(0..=i);
            tail.swap(i, j);
        }
        let lexicon = crate::knowledge::LexiconTagger::default_tagger();
        let mut words: Vec<BankWord> = FUNCTION_WORDS
            .iter()
            .map(|&w| BankWord { text: w.to_string(), pos: lexicon.tag_word(w), ner: NerTag::O, class: WordClass::Function })
            .collect();
        words.extend(tail);

        let mut cdf = Vec::with_capacity(words.len());
        let mut acc = 0.0;
        for rank in 0..words.len() {
            acc += 1.0 / ((rank + 1) as f64).powf(zipf_exponent);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        WordBank { words, cdf }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Draws a rank from the Zipf distribution.
    pub fn sample(&self, r: &mut Rng) -> usize {
        let u: f64 = r.random();
        self.cdf.partition_point(|&c| c < u).min(self.words.len() - 1)
    }

    /// Probability mass of `rank`.
    pub fn mass(&self, rank: usize) -> f64 {
        self.cdf[rank] - if rank == 0 { 0.0 } else { self.cdf[rank - 1] }
    }

    /// Expected counts per million words, used to train the vocabulary.
    pub fn weighted_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for (rank, w) in self.words.iter().enumerate() {
            let c = (self.mass(rank) * 1e6).round().max(2.0) as u64;
            *counts.entry(w.text.clone()).or_default() += c;
            // sentence-final form
            *counts.entry(format!("{}.", w.text)).or_default() += (c / 12).max(2);
        }
        counts
    }

    /// Gazetteer lines for every entity in the bank.
    pub fn gazetteer_tsv(&self) -> String {
        let mut out = String::from("# phrase\ttag\n");
        for w in self.words.iter().filter(|w| w.class == WordClass::Entity) {
            let tag = match w.ner {
                NerTag::Per => "PER",
                NerTag::Loc => "LOC",
                NerTag::Org => "ORG",
                NerTag::Misc => "MISC",
                NerTag::O => continue,
            };
            out.push_str(&format!("{}\t{tag}\n", w.text));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{GazetteerTagger, LexiconTagger, NerTagger};

    #[test]
    fn bank_is_deterministic_and_unique() {
        let a = WordBank::generate(1, 200, 20, 1.0);
        let b = WordBank::generate(1, 200, 20, 1.0);
        assert_eq!(a.words, b.words);
        let uniq: HashSet<&str> = a.words.iter().map(|w| w.text.as_str()).collect();
        assert_eq!(uniq.len(), a.len());
        assert_eq!(a.len(), FUNCTION_WORDS.len() + 220);
        assert!((a.cdf.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tags_agree_with_bundled_taggers() {
        let bank = WordBank::standard();
        let pos = LexiconTagger::default_tagger();
        for w in bank.words.iter().filter(|w| w.class != WordClass::Function) {
            assert_eq!(pos.tag_word(&w.text), w.pos, "{}", w.text);
        }
        let ner = GazetteerTagger::from_tsv(&bank.gazetteer_tsv()).unwrap();
        let ents: Vec<&BankWord> = bank.words.iter().filter(|w| w.class == WordClass::Entity).collect();
        let texts: Vec<&str> = ents.iter().map(|w| w.text.as_str()).collect();
        let tags = ner.tag(&texts);
        assert!(ents.iter().zip(&tags).all(|(w, &t)| w.ner == t));
    }

    #[test]
    fn bundled_gazetteer_matches_bank() {
        let bundled = include_str!("../../data/gazetteer.tsv");
        assert_eq!(bundled, WordBank::standard().gazetteer_tsv());
    }

    #[test]
    fn zipf_samples_favour_top_ranks() {
        let bank = WordBank::generate(2, 500, 0, 1.0);
        let mut r = rng(5);
        let draws: Vec<usize> = (0..20_000).map(|_| bank.sample(&mut r)).collect();
        let zeros = draws.iter().filter(|&&d| d == 0).count() as f64 / 20_000.0;
        assert!((zeros - bank.mass(0)).abs() < 0.01);
    }
}
