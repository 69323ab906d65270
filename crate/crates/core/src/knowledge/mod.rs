//! Word-level knowledge features broadcast to sub-word tokens: term
//! frequency bucket, part of speech and named-entity tag.

mod frequency;
mod ner;
mod pos;

pub use frequency::{normalize_word, tf_bucket, FrequencyTable, TF_BUCKETS};
pub use ner::{GazetteerTagger, NerTag, NerTagger};
pub use pos::{LexiconTagger, PosTag, PosTagger};

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentLayout, TokenizedDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenFeatures {
    pub tf_bucket: u8,
    pub pos: PosTag,
    pub ner: NerTag,
}

/// One feature row per token of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeFeatures {
    pub tokens: Vec<TokenFeatures>,
}

/// Pair of taggers used by [`featurize`].
pub struct Taggers {
    pub pos: Box<dyn PosTagger + Send + Sync>,
    pub ner: Box<dyn NerTagger + Send + Sync>,
}

impl Default for Taggers {
    fn default() -> Self {
        Taggers {
            pos: Box::new(LexiconTagger::default_tagger()),
            ner: Box::new(GazetteerTagger::default_tagger()),
        }
    }
}

/// Computes word-level features on `doc` and copies them onto every token the
/// word owns.
pub fn featurize(
    tdoc: &TokenizedDocument,
    doc: &DocumentLayout,
    table: &FrequencyTable,
    taggers: &Taggers,
) -> KnowledgeFeatures {
    let words = doc.word_texts();
    let pos = taggers.pos.tag(&words);
    let ner = taggers.ner.tag(&words);
    let per_word: Vec<TokenFeatures> = words
        .iter()
        .enumerate()
        .map(|(i, w)| TokenFeatures {
            tf_bucket: tf_bucket(table.count(w)),
            pos: pos[i],
            ner: ner[i],
        })
        .collect();
    KnowledgeFeatures {
        tokens: tdoc.tokens.iter().map(|t| per_word[t.word_index]).collect(),
    }
}
