use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 17] = [
        PosTag::Adj,
        PosTag::Adp,
        PosTag::Adv,
        PosTag::Aux,
        PosTag::Cconj,
        PosTag::Det,
        PosTag::Intj,
        PosTag::Noun,
        PosTag::Num,
        PosTag::Part,
        PosTag::Pron,
        PosTag::Propn,
        PosTag::Punct,
        PosTag::Sconj,
        PosTag::Sym,
        PosTag::Verb,
        PosTag::X,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<PosTag> {
        PosTag::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Adp => "ADP",
            PosTag::Adv => "ADV",
            PosTag::Aux => "AUX",
            PosTag::Cconj => "CCONJ",
            PosTag::Det => "DET",
            PosTag::Intj => "INTJ",
            PosTag::Noun => "NOUN",
            PosTag::Num => "NUM",
            PosTag::Part => "PART",
            PosTag::Pron => "PRON",
            PosTag::Propn => "PROPN",
            PosTag::Punct => "PUNCT",
            PosTag::Sconj => "SCONJ",
            PosTag::Sym => "SYM",
            PosTag::Verb => "VERB",
            PosTag::X => "X",
        }
    }
}

pub trait PosTagger {
    /// One tag per input word.
    fn tag(&self, words: &[&str]) -> Vec<PosTag>;
}

/// Suffix rules for words missing from the lexicon. The longest matching
/// suffix wins; the stem left over must keep at least two characters.
pub const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ist", PosTag::Noun),
    ("er", PosTag::Noun),
    ("or", PosTag::Noun),
    ("ing", PosTag::Verb),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
    ("ify", PosTag::Verb),
    ("ate", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("less", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("ous", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ary", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("ly", PosTag::Adv),
];

/// Closed-class lexicon lookup, then shape and suffix rules, then `X`.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    lexicon: HashMap<String, PosTag>,
}

static DEFAULT_LEXICON: OnceLock<LexiconTagger> = OnceLock::new();

impl LexiconTagger {
    pub fn new(lexicon: HashMap<String, PosTag>) -> Self {
        LexiconTagger { lexicon }
    }

    /// Parses `word<TAB>TAG` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lexicon = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("POS lexicon line {}: expected word<TAB>tag", n + 1)))?;
            let tag = PosTag::parse(tag)
                .ok_or_else(|| Error::Parse(format!("POS lexicon line {}: unknown tag {tag:?}", n + 1)))?;
            lexicon.insert(word.trim().to_lowercase(), tag);
        }
        Ok(LexiconTagger { lexicon })
    }

    pub fn default_tagger() -> LexiconTagger {
        DEFAULT_LEXICON
            .get_or_init(|| {
                LexiconTagger::from_tsv(include_str!("../../data/pos_lexicon.tsv"))
                    .expect("bundled POS lexicon is valid")
            })
            .clone()
    }

    pub fn tag_word(&self, word: &str) -> PosTag {
        let core = word.trim_matches(|c: char| !c.is_alphanumeric());
        if core.is_empty() {
            return if word.chars().all(|c| c.is_ascii_punctuation()) {
                PosTag::Punct
            } else {
                PosTag::Sym
            };
        }
        let lower = core.to_lowercase();
        if let Some(&t) = self.lexicon.get(&lower) {
            return t;
        }
        if core.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.') {
            return PosTag::Num;
        }
        if core.chars().next().is_some_and(char::is_uppercase) {
            return PosTag::Propn;
        }
        let n = lower.chars().count();
        SUFFIX_RULES
            .iter()
            .filter(|(sfx, _)| lower.ends_with(sfx) && n >= sfx.chars().count() + 2)
            .max_by_key(|(sfx, _)| sfx.len())
            .map(|&(_, t)| t)
            .unwrap_or(PosTag::X)
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, words: &[&str]) -> Vec<PosTag> {
        words.iter().map(|w| self.tag_word(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_class_and_suffixes() {
        let t = LexiconTagger::default_tagger();
        assert_eq!(t.tag_word("the"), PosTag::Det);
        assert_eq!(t.tag_word("The"), PosTag::Det);
        assert_eq!(t.tag_word("running"), PosTag::Verb);
        assert_eq!(t.tag_word("quickly"), PosTag::Adv);
        assert_eq!(t.tag_word("national"), PosTag::Adj);
        assert_eq!(t.tag_word("creation"), PosTag::Noun);
        assert_eq!(t.tag_word("1984"), PosTag::Num);
        assert_eq!(t.tag_word("Paris"), PosTag::Propn);
        assert_eq!(t.tag_word(","), PosTag::Punct);
        assert_eq!(t.tag_word("zzq"), PosTag::X);
        // stem too short for the suffix rule
        assert_eq!(t.tag_word("ing"), PosTag::X);
    }

    #[test]
    fn one_tag_per_word() {
        let t = LexiconTagger::default_tagger();
        let words = ["a", "b", "c", "", "--"];
        assert_eq!(t.tag(&words).len(), words.len());
        assert!(t.tag(&[]).is_empty());
    }

    #[test]
    fn tsv_errors() {
        assert!(LexiconTagger::from_tsv("the\tDET\n").is_ok());
        assert!(LexiconTagger::from_tsv("the DET\n").is_err());
        assert!(LexiconTagger::from_tsv("the\tFOO\n").is_err());
    }
}
