//! Documents, their on-screen layout, and sub-word tokenization.

mod layout;
mod tokenizer;
mod vocab_train;

pub use layout::{load_document, DocumentLayout, WordBox};
pub use tokenizer::{
    detokenize, tokenize, word_token_spans, Token, TokenizedDocument, Vocab, BYTE_FALLBACK_TOKENS,
};
pub use vocab_train::train_vocab;
