//! Detection of unknown words from webcam-grade gaze traces.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`]: document layouts, sub-word tokenization and word/token alignment.
//! * [`gaze`]: moving-average denoising and uniform resampling of raw traces.
//! * [`align`]: uniform-reading-speed time anticipation, context windows and
//!   negative sampling.
//! * [`knowledge`]: term-frequency, part-of-speech and named-entity features.
//! * [`model`]: the detector (recurrent position encoders, gaze-text attention,
//!   context encoder, knowledge embedding, per-token classifier) and training.
//! * [`eval`]: metrics, transfer protocols, Jaccard analysis and ablations.
//! * [`synth`]: synthetic reading sessions with planted unknown words.
//! * [`pipeline`]: end-to-end scoring of a recorded session with a checkpoint.

pub mod align;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gaze;
pub mod knowledge;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod util;

pub use align::{AlignConfig, ContextWindow, ReadingSession};
pub use corpus::{DocumentLayout, TokenizedDocument, Vocab, WordBox};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use gaze::{GazeSample, GazeTrace};
pub use knowledge::{FrequencyTable, KnowledgeFeatures, TokenFeatures};
pub use model::{ModelConfig, Parameters};
