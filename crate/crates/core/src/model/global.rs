use std::collections::{BTreeMap, HashMap};

use super::{Model, Variant};
use crate::data::{doc_bow, Document};
use crate::encode::{assemble_single, make_projection, project_bow, ProjectionMatrix};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::text::{tokenize, Vocabulary};

/// Per-document feature vectors, keyed by `doc_id`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalFeatures {
    features: HashMap<String, Tensor>,
}

impl GlobalFeatures {
    pub fn get(&self, doc_id: &str) -> Option<&Tensor> {
        self.features.get(doc_id)
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, feature: Tensor) {
        self.features.insert(doc_id.into(), feature);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Normalized random projection of each document's bag of words.
    pub fn from_bow(
        docs: &BTreeMap<String, Document>,
        vocab: &Vocabulary,
        projection: &ProjectionMatrix,
    ) -> Result<Self> {
        let mut out = Self::default();
        for (id, doc) in docs {
            out.insert(id.clone(), project_bow(&doc_bow(doc, vocab), projection)?);
        }
        Ok(out)
    }

    /// Mean sentence embedding of each document under a frozen encoder.
    pub fn from_embeddings(docs: &BTreeMap<String, Document>, encoder: &DocEncoder) -> Result<Self> {
        let mut out = Self::default();
        for (id, doc) in docs {
            out.insert(id.clone(), doc_embedding(doc, encoder)?);
        }
        Ok(out)
    }
}

/// Side inputs a variant may need beyond the token sequences.
#[derive(Clone, Debug, Default)]
pub struct Aux {
    pub global: Option<GlobalFeatures>,
}

impl Aux {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_global(global: GlobalFeatures) -> Self {
        Self { global: Some(global) }
    }
}

/// Frozen snapshot of a trained pair encoder used to embed document sentences.
#[derive(Clone, Debug)]
pub struct DocEncoder {
    model: Model,
}

impl DocEncoder {
    pub fn new(model: Model) -> Result<Self> {
        if model.variant() != Variant::Base {
            return Err(Error::Config(format!(
                "document encoder must be a base model, got {}",
                model.variant()
            )));
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn width(&self) -> usize {
        self.model.config().d_model
    }

    /// `[CLS]` embedding of `[CLS] s [EOS]`.
    pub fn embed_sentence(&self, sentence: &str) -> Result<Tensor> {
        let ids = self.model.vocab().encode_tokens(&tokenize(sentence));
        let seq = assemble_single(&ids, self.model.config().max_len)?;
        self.model.encode_sequence(&seq)
    }
}

/// Mean of the sentence embeddings of `doc`.
pub fn doc_embedding(doc: &Document, encoder: &DocEncoder) -> Result<Tensor> {
    if doc.sentences.is_empty() {
        return Err(Error::Integrity(format!("document {} has no sentences", doc.doc_id)));
    }
    let mut sum = vec![0.0; encoder.width()];
    for s in &doc.sentences {
        for (o, v) in sum.iter_mut().zip(encoder.embed_sentence(s)?.data()) {
            *o += v;
        }
    }
    let n = doc.sentences.len() as f64;
    Ok(Tensor::vector(sum.into_iter().map(|v| v / n).collect()))
}

impl Model {
    /// The frozen projection for bag-of-words variants.
    pub fn projection(&self) -> Result<Option<ProjectionMatrix>> {
        if !self.config.variant.uses_bow() {
            return Ok(None);
        }
        make_projection(self.config.vocab_size, self.config.d_model, self.config.projection_seed).map(Some)
    }

    /// Side inputs for scoring candidates drawn from `docs`.
    pub fn build_aux(
        &self,
        docs: &BTreeMap<String, Document>,
        doc_encoder: Option<&DocEncoder>,
    ) -> Result<Aux> {
        match self.config.variant {
            Variant::GlobB | Variant::Dual => {
                let r = self.projection()?.expect("bow variant has a projection");
                Ok(Aux::with_global(GlobalFeatures::from_bow(docs, &self.vocab, &r)?))
            }
            Variant::GlobE => {
                let enc = doc_encoder.ok_or_else(|| {
                    Error::Config("glob_e needs a frozen document encoder".into())
                })?;
                if enc.width() != self.config.d_model {
                    return Err(Error::Compatibility(format!(
                        "document encoder width {} differs from d_model {}",
                        enc.width(),
                        self.config.d_model
                    )));
                }
                Ok(Aux::with_global(GlobalFeatures::from_embeddings(docs, enc)?))
            }
            _ => Ok(Aux::none()),
        }
    }
}
