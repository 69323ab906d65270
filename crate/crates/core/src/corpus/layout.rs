use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One word on screen. `x`/`y` are the box center in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    pub index: usize,
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default)]
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentLayout {
    #[serde(default)]
    pub doc_id: String,
    #[serde(default)]
    pub full_text: String,
    pub words: Vec<WordBox>,
}

impl DocumentLayout {
    /// Builds a layout and checks its invariants. An empty `full_text` is
    /// replaced by the words joined with single spaces.
    pub fn new(doc_id: impl Into<String>, full_text: impl Into<String>, words: Vec<WordBox>) -> Result<Self> {
        let mut doc = DocumentLayout {
            doc_id: doc_id.into(),
            full_text: full_text.into(),
            words,
        };
        if doc.full_text.is_empty() {
            doc.full_text = doc.joined_text();
        }
        doc.validate()?;
        Ok(doc)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DocumentLayout = serde_json::from_str(s)?;
        DocumentLayout::new(doc.doc_id, doc.full_text, doc.words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word_texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }

    fn joined_text(&self) -> String {
        self.word_texts().join(" ")
    }

    pub fn validate(&self) -> Result<()> {
        let mut cursor = 0usize;
        for (pos, word) in self.words.iter().enumerate() {
            let fail = |reason: String| Err(Error::Layout { index: word.index, reason });
            if word.index != pos {
                return fail(format!("expected index {pos}, found {} (indices must be contiguous and ordered)", word.index));
            }
            if word.text.is_empty() {
                return fail("empty word text".into());
            }
            if word.text.chars().any(char::is_whitespace) {
                return fail(format!("word text {:?} contains whitespace", word.text));
            }
            for (name, v) in [("x", word.x), ("y", word.y), ("w", word.w), ("h", word.h)] {
                if !v.is_finite() || v < 0.0 {
                    return fail(format!("{name} = {v} must be finite and non-negative"));
                }
            }
            if word.w <= 0.0 || word.h <= 0.0 {
                return fail(format!("box size {}x{} must be positive", word.w, word.h));
            }
            match self.full_text[cursor..].find(&word.text) {
                Some(offset) => cursor += offset + word.text.len(),
                None => {
                    return fail(format!("text {:?} not found in full_text after byte {cursor}", word.text))
                }
            }
        }
        Ok(())
    }
}

/// Loads and validates a layout JSON file. A missing `doc_id` defaults to the
/// file stem.
pub fn load_document(path: &Path) -> Result<DocumentLayout> {
    let raw = std::fs::read_to_string(path)?;
    let mut doc: DocumentLayout =
        serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if doc.doc_id.is_empty() {
        doc.doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    DocumentLayout::new(doc.doc_id, doc.full_text, doc.words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(index: usize, text: &str) -> WordBox {
        WordBox { index, text: text.into(), x: 100.0 + index as f64 * 50.0, y: 50.0, w: 40.0, h: 12.0, page: 0 }
    }

    #[test]
    fn one_word_document() {
        let doc = DocumentLayout::from_json(
            r#"{"words":[{"index":0,"text":"hello","x":100,"y":50,"w":40,"h":12}]}"#,
        )
        .unwrap();
        assert_eq!(doc.len(), 1);
        assert_eq!(doc.full_text, "hello");
    }

    #[test]
    fn duplicated_index_is_rejected() {
        let err = DocumentLayout::from_json(
            r#"{"words":[{"index":0,"text":"hello","x":100,"y":50,"w":40,"h":12},
                         {"index":0,"text":"hello","x":150,"y":50,"w":40,"h":12}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Layout { index: 0, .. }), "{err}");
    }

    #[test]
    fn out_of_order_and_gaps_rejected() {
        let err = DocumentLayout::new("d", "", vec![word(1, "a"), word(0, "b")]).unwrap_err();
        assert!(matches!(err, Error::Layout { index: 1, .. }));
        let err = DocumentLayout::new("d", "", vec![word(0, "a"), word(2, "b")]).unwrap_err();
        assert!(matches!(err, Error::Layout { index: 2, .. }));
    }

    #[test]
    fn text_must_appear_in_order() {
        let err = DocumentLayout::new("d", "beta alpha", vec![word(0, "alpha"), word(1, "beta")]).unwrap_err();
        assert!(matches!(err, Error::Layout { index: 1, .. }));
        DocumentLayout::new("d", "alpha, beta!", vec![word(0, "alpha"), word(1, "beta")]).unwrap();
    }

    #[test]
    fn bad_geometry_rejected() {
        let mut w = word(0, "a");
        w.w = 0.0;
        assert!(DocumentLayout::new("d", "", vec![w]).is_err());
        let mut w = word(0, "a");
        w.x = f64::NAN;
        assert!(DocumentLayout::new("d", "", vec![w]).is_err());
        let mut w = word(0, "a");
        w.y = -1.0;
        assert!(DocumentLayout::new("d", "", vec![w]).is_err());
    }

    #[test]
    fn load_defaults_doc_id_to_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("article7.json");
        std::fs::write(&path, r#"{"words":[{"index":0,"text":"hi","x":1,"y":1,"w":4,"h":4}]}"#).unwrap();
        let doc = load_document(&path).unwrap();
        assert_eq!(doc.doc_id, "article7");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_document(&path), Err(Error::Parse(_))));
    }
}
