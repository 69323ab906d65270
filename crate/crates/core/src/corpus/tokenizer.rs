use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::layout::DocumentLayout;
use crate::error::{Error, Result};

/// Ids `vocab.len() .. vocab.len() + 256` are reserved for raw bytes.
pub const BYTE_FALLBACK_TOKENS: usize = 256;

static DEFAULT_VOCAB: OnceLock<Vocab> = OnceLock::new();

/// Sub-word vocabulary. Token id = line number in the vocabulary file.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    max_chars: usize,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        let mut max_chars = 0;
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::Parse(format!("vocabulary line {} is empty", i + 1)));
            }
            if ids.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Parse(format!("duplicate vocabulary entry {tok:?} on line {}", i + 1)));
            }
            max_chars = max_chars.max(tok.chars().count());
        }
        Ok(Vocab { tokens, ids, max_chars })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Vocab::from_tokens(text.lines().filter(|l| !l.is_empty()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Vocab::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled vocabulary trained from the synthetic word bank.
    pub fn default_vocab() -> &'static Vocab {
        DEFAULT_VOCAB.get_or_init(|| {
            Vocab::parse(include_str!("../../data/vocab.txt")).expect("bundled vocabulary is valid")
        })
    }

    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    /// Number of learned entries (excluding byte fallback ids).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Total id space including the byte fallback range.
    pub fn size(&self) -> usize {
        self.tokens.len() + BYTE_FALLBACK_TOKENS
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token_text(&self, id: u32) -> Option<String> {
        let id = id as usize;
        if id < self.tokens.len() {
            Some(self.tokens[id].clone())
        } else if id < self.size() {
            Some(byte_token_text((id - self.tokens.len()) as u8))
        } else {
            None
        }
    }

    /// Greedy longest-match segmentation of one word; bytes of characters no
    /// entry covers become byte tokens.
    pub fn tokenize_word(&self, word: &str) -> Vec<(u32, String)> {
        let mut out = Vec::new();
        let mut rest = word;
        while !rest.is_empty() {
            let boundaries: Vec<usize> = rest
                .char_indices()
                .map(|(i, c)| i + c.len_utf8())
                .take(self.max_chars)
                .collect();
            let hit = boundaries
                .iter()
                .rev()
                .find_map(|&end| self.ids.get(&rest[..end]).map(|&id| (id, end)));
            match hit {
                Some((id, end)) => {
                    out.push((id, rest[..end].to_string()));
                    rest = &rest[end..];
                }
                None => {
                    let end = rest.chars().next().map_or(1, char::len_utf8);
                    for &b in &rest.as_bytes()[..end] {
                        out.push(((self.tokens.len() + b as usize) as u32, byte_token_text(b)));
                    }
                    rest = &rest[end..];
                }
            }
        }
        out
    }
}

fn byte_token_text(b: u8) -> String {
    format!("<0x{b:02X}>")
}

fn parse_byte_token(text: &str) -> Option<u8> {
    let hex = text.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub text: String,
    pub word_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub tokens: Vec<Token>,
}

impl TokenizedDocument {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn tokenize(doc: &DocumentLayout, vocab: &Vocab) -> TokenizedDocument {
    let tokens = doc
        .words
        .iter()
        .flat_map(|w| {
            vocab
                .tokenize_word(&w.text)
                .into_iter()
                .map(move |(id, text)| Token { id, text, word_index: w.index })
        })
        .collect();
    TokenizedDocument { doc_id: doc.doc_id.clone(), tokens }
}

/// Reassembles text from a token run, decoding byte-fallback tokens.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut bytes = Vec::new();
    for t in tokens {
        match parse_byte_token(&t.text) {
            Some(b) => bytes.push(b),
            None => bytes.extend_from_slice(t.text.as_bytes()),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Maps each word ordinal to the half-open range of token indices it owns.
pub fn word_token_spans(tdoc: &TokenizedDocument) -> BTreeMap<usize, Range<usize>> {
    let mut spans: BTreeMap<usize, Range<usize>> = BTreeMap::new();
    for (i, tok) in tdoc.tokens.iter().enumerate() {
        spans
            .entry(tok.word_index)
            .and_modify(|r| r.end = i + 1)
            .or_insert(i..i + 1);
    }
    spans
}
