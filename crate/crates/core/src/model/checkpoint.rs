use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocEncoder, Model, ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};
use crate::text::Vocabulary;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    #[serde(flatten)]
    tensor: Tensor,
}

/// Training provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub train_seed: Option<u64>,
    pub epoch: Option<usize>,
    pub dev_map: Option<f64>,
}

/// Self-contained JSON snapshot of a model, its vocabulary and, for
/// `glob_e`, the frozen document encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    vocab: Vec<String>,
    params: Vec<NamedTensor>,
    doc_encoder: Option<Box<Checkpoint>>,
    #[serde(default)]
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn from_model(model: &Model, doc_encoder: Option<&DocEncoder>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: model.config().clone(),
            vocab: model.vocab().tokens().to_vec(),
            params: model
                .params()
                .iter()
                .map(|(_, name, t)| NamedTensor { name: name.to_string(), tensor: t.clone() })
                .collect(),
            doc_encoder: doc_encoder.map(|e| Box::new(Checkpoint::from_model(e.model(), None))),
            meta: CheckpointMeta::default(),
        }
    }

    pub fn with_meta(mut self, meta: CheckpointMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Rebuilds the model (and document encoder, if stored).
    pub fn to_model(&self) -> Result<(Model, Option<DocEncoder>)> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let vocab = Vocabulary::from_tokens(self.vocab.clone())
            .map_err(|e| Error::Compatibility(format!("bad vocabulary: {e}")))?;
        let mut model = Model::new(self.config.clone(), vocab)
            .map_err(|e| Error::Compatibility(format!("bad config: {e}")))?;
        let mut store = ParamStore::new();
        for nt in &self.params {
            store.insert(nt.name.clone(), nt.tensor.clone());
        }
        model.set_params(store)?;
        let doc_encoder = match &self.doc_encoder {
            Some(c) => Some(DocEncoder::new(c.to_model()?.0)?),
            None => None,
        };
        if self.config.variant == Variant::GlobE && doc_encoder.is_none() {
            return Err(Error::Compatibility("glob_e checkpoint lacks its document encoder".into()));
        }
        Ok((model, doc_encoder))
    }

    /// Rejects checkpoints of a different variant or architecture.
    pub fn check_matches(&self, expected: &ModelConfig) -> Result<()> {
        if self.config.variant != expected.variant {
            return Err(Error::Compatibility(format!(
                "checkpoint holds a {} model, expected {}",
                self.config.variant, expected.variant
            )));
        }
        if self.config != *expected {
            return Err(Error::Compatibility(format!(
                "checkpoint config {:?} differs from expected {:?}",
                self.config, expected
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// Loads and requires the stored variant to be `variant`.
    pub fn load_variant(path: &Path, variant: Variant) -> Result<Self> {
        let ck = Self::load(path)?;
        if ck.config.variant != variant {
            return Err(Error::Compatibility(format!(
                "{} holds a {} model, expected {variant}",
                path.display(),
                ck.config.variant
            )));
        }
        Ok(ck)
    }
}
