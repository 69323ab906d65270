use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentLayout;
use crate::error::{Error, Result};

pub const TF_BUCKETS: usize = 16;

/// Case-folded corpus counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<String, u64>,
    pub total_count: u64,
}

/// Lower-cases and strips leading/trailing punctuation.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// `floor(log2(count + 1))`, clamped to the last bucket.
pub fn tf_bucket(count: u64) -> u8 {
    (count.saturating_add(1).ilog2() as usize).min(TF_BUCKETS - 1) as u8
}

impl FrequencyTable {
    pub fn from_words<'a, I: IntoIterator<Item = &'a str>>(words: I) -> Self {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for w in words {
            let key = normalize_word(w);
            if !key.is_empty() {
                *counts.entry(key).or_default() += 1;
            }
        }
        let total_count = counts.values().sum();
        FrequencyTable { counts, total_count }
    }

    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Result<Self> {
        let texts: Vec<&str> = texts.into_iter().collect();
        if texts.is_empty() {
            return Err(Error::InvalidArgument("frequency table needs at least one document".into()));
        }
        Ok(Self::from_words(texts.iter().flat_map(|t| t.split_whitespace())))
    }

    pub fn from_docs(docs: &[DocumentLayout]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("frequency table needs at least one document".into()));
        }
        Ok(Self::from_words(docs.iter().flat_map(|d| d.words.iter().map(|w| w.text.as_str()))))
    }

    /// Count for `word` after normalisation; 0 when absent.
    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(&normalize_word(word)).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn counts_simple_corpus() {
        let t = FrequencyTable::from_texts(["a a b"]).unwrap();
        assert_eq!(t.count("a"), 2);
        assert_eq!(t.count("b"), 1);
        assert_eq!(t.total_count, 3);
        assert_eq!(t.count("zebra"), 0);
        assert_eq!(tf_bucket(t.count("zebra")), 0);
    }

    #[test]
    fn case_folded() {
        let t = FrequencyTable::from_texts(["The the THE, cat"]).unwrap();
        assert_eq!(t.count("the"), 3);
        assert_eq!(t.count("The"), 3);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(FrequencyTable::from_texts(Vec::<&str>::new()).is_err());
        assert!(FrequencyTable::from_docs(&[]).is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!(tf_bucket(0), 0);
        assert_eq!(tf_bucket(1), 1);
        assert_eq!(tf_bucket(2), 1);
        assert_eq!(tf_bucket(3), 2);
        assert_eq!(tf_bucket(1000), 9);
        assert_eq!(tf_bucket(u64::MAX), 15);
    }

    proptest! {
        #[test]
        fn matches_hash_recount(words in proptest::collection::vec("[a-cA-C]{1,3}", 1..200)) {
            let text = words.join(" ");
            let t = FrequencyTable::from_texts([text.as_str()]).unwrap();
            let mut oracle: HashMap<String, u64> = HashMap::new();
            for w in &words {
                *oracle.entry(w.to_lowercase()).or_insert(0) += 1;
            }
            prop_assert_eq!(t.counts.len(), oracle.len());
            for (k, v) in &oracle {
                prop_assert_eq!(t.counts[k], *v);
            }
            prop_assert_eq!(t.total_count, words.len() as u64);
            prop_assert!(t.counts.values().all(|&c| c >= 1));
        }

        #[test]
        fn bucket_matches_float_formula(c in 0u64..1_000_000) {
            let expect = (((c + 1) as f64).log2().floor() as u64).min(15) as u8;
            prop_assert_eq!(tf_bucket(c), expect);
        }
    }
}
