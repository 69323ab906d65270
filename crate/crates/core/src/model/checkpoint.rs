use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{EncoderKind, ModelConfig};
use super::embedding_file::EmbeddingStore;
use super::params::Parameters;
use super::tensor::Mat;
use super::Detector;
use crate::corpus::Vocab;
use crate::error::Result;
use crate::knowledge::FrequencyTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    #[serde(flatten)]
    pub value: Mat,
}

/// JSON container: config header, named tensors, and the vocabulary and
/// frequency table needed to featurize new documents consistently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub epoch: usize,
    pub tensors: Vec<NamedTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencyTable>,
    /// Vocabulary file contents; absent means the built-in vocabulary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<String>,
}

impl Checkpoint {
    pub fn new(det: &Detector, epoch: usize, frequency: Option<&FrequencyTable>, vocab: Option<&Vocab>) -> Self {
        Checkpoint {
            config: det.config.clone(),
            epoch,
            tensors: det.params.iter().map(|(n, t)| NamedTensor { name: n.to_string(), value: t.clone() }).collect(),
            frequency: frequency.cloned(),
            vocab: vocab.map(Vocab::to_file_string),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::util::read_json(path)
    }

    pub fn parameters(&self) -> Parameters {
        Parameters::from_named(self.tensors.iter().map(|t| (t.name.clone(), t.value.clone())).collect())
    }

    pub fn vocab(&self) -> Result<Vocab> {
        match &self.vocab {
            Some(text) => Vocab::parse(text),
            None => Ok(Vocab::default_vocab().clone()),
        }
    }

    /// Rebuilds the detector, loading the embedding file named in the config
    /// when the context encoder uses one.
    pub fn detector(&self) -> Result<Detector> {
        let mut det = Detector::with_params(self.config.clone(), self.parameters())?;
        if self.config.blocks.context && self.config.encoder == EncoderKind::EmbeddingFile {
            if let Some(path) = &self.config.embedding_file {
                det.embeddings = Some(EmbeddingStore::load(path)?);
            }
        }
        Ok(det)
    }
}
