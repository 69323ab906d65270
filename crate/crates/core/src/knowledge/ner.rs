use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NerTag {
    O,
    Per,
    Loc,
    Org,
    Misc,
}

impl NerTag {
    pub const ALL: [NerTag; 5] = [NerTag::O, NerTag::Per, NerTag::Loc, NerTag::Org, NerTag::Misc];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<NerTag> {
        match s.trim().to_ascii_uppercase().as_str() {
            "O" => Some(NerTag::O),
            "PER" => Some(NerTag::Per),
            "LOC" => Some(NerTag::Loc),
            "ORG" => Some(NerTag::Org),
            "MISC" => Some(NerTag::Misc),
            _ => None,
        }
    }
}

pub trait NerTagger {
    fn tag(&self, words: &[&str]) -> Vec<NerTag>;
}

/// Longest-match scan over a phrase gazetteer. Matching ignores punctuation
/// attached to the ends of each word and is case-sensitive.
#[derive(Debug, Clone, Default)]
pub struct GazetteerTagger {
    entries: Vec<(Vec<String>, NerTag)>,
    max_len: usize,
}

static DEFAULT_GAZETTEER: OnceLock<GazetteerTagger> = OnceLock::new();

fn strip(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

impl GazetteerTagger {
    pub fn new(entries: Vec<(String, NerTag)>) -> Self {
        let mut parsed: Vec<(Vec<String>, NerTag)> = entries
            .into_iter()
            .map(|(phrase, tag)| (phrase.split_whitespace().map(|w| strip(w).to_string()).collect(), tag))
            .filter(|(p, _): &(Vec<String>, NerTag)| !p.is_empty())
            .collect();
        // longest phrases first so the scan can take the first hit
        parsed.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let max_len = parsed.first().map_or(0, |e| e.0.len());
        GazetteerTagger { entries: parsed, max_len }
    }

    /// Parses `phrase<TAB>TAG` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("gazetteer line {}: expected phrase<TAB>tag", n + 1)))?;
            let tag = NerTag::parse(tag)
                .ok_or_else(|| Error::Parse(format!("gazetteer line {}: unknown tag {tag:?}", n + 1)))?;
            entries.push((phrase.to_string(), tag));
        }
        Ok(GazetteerTagger::new(entries))
    }

    pub fn default_tagger() -> GazetteerTagger {
        DEFAULT_GAZETTEER
            .get_or_init(|| {
                GazetteerTagger::from_tsv(include_str!("../../data/gazetteer.tsv"))
                    .expect("bundled gazetteer is valid")
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl NerTagger for GazetteerTagger {
    fn tag(&self, words: &[&str]) -> Vec<NerTag> {
        let stripped: Vec<&str> = words.iter().map(|w| strip(w)).collect();
        let mut tags = vec![NerTag::O; words.len()];
        let mut i = 0;
        while i < words.len() {
            let remaining = words.len() - i;
            let hit = self.entries.iter().find(|(phrase, _)| {
                phrase.len() <= remaining.min(self.max_len)
                    && phrase.iter().zip(&stripped[i..]).all(|(p, w)| p == w)
            });
            match hit {
                Some((phrase, tag)) => {
                    tags[i..i + phrase.len()].fill(*tag);
                    i += phrase.len();
                }
                None => i += 1,
            }
        }
        tags
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> GazetteerTagger {
        GazetteerTagger::from_tsv("New York\tLOC\nNew York Times\tORG\nYork\tPER\n").unwrap()
    }

    #[test]
    fn lowercase_sentence_is_all_o() {
        let t = GazetteerTagger::default_tagger();
        let words = ["the", "cat", "sat", "on", "the", "mat"];
        assert_eq!(t.tag(&words), vec![NerTag::O; 6]);
    }

    #[test]
    fn multiword_longest_match() {
        let t = gaz();
        assert_eq!(t.tag(&["in", "New", "York", "today"]), [NerTag::O, NerTag::Loc, NerTag::Loc, NerTag::O]);
        assert_eq!(
            t.tag(&["the", "New", "York", "Times,"]),
            [NerTag::O, NerTag::Org, NerTag::Org, NerTag::Org]
        );
        assert_eq!(t.tag(&["York."]), [NerTag::Per]);
        assert_eq!(t.tag(&["new", "york"]), [NerTag::O, NerTag::O]);
    }

    #[test]
    fn output_length_matches_input() {
        let t = gaz();
        for n in 0..6 {
            let words = vec!["New"; n];
            assert_eq!(t.tag(&words).len(), n);
        }
    }

    #[test]
    fn default_gazetteer_loads() {
        let t = GazetteerTagger::default_tagger();
        assert!(t.len() >= 300);
        assert_eq!(t.tag(&["Tastkoun", "the"]), [NerTag::Org, NerTag::O]);
    }
}
