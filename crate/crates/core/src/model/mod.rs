//! Answer-sentence rankers: a transformer encoder pooled at `[CLS]`, optional
//! local context (neighbor sentences) and optional global context (a
//! document vector), scored by a single linear layer.

mod checkpoint;
mod encoder;
mod global;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Candidate, QuestionGroup};
use crate::encode::{assemble_pair, assemble_triplet, TokenSequence};
use crate::error::{Error, Result};
use crate::numerics::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::text::{tokenize, Vocabulary};

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_FORMAT_VERSION};
pub use encoder::EncoderParams;
pub use global::{doc_embedding, Aux, DocEncoder, GlobalFeatures};

/// Which context the ranker sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Question/answer pair only.
    Base,
    /// One encoder over `(q, prev, s, next)` with four segments.
    LocT,
    /// Three pair encoders over `(q, prev)`, `(q, s)`, `(q, next)`.
    LocE,
    /// Pair encoder plus the projected document bag of words.
    GlobB,
    /// Pair encoder plus the mean sentence embedding of the document.
    GlobE,
    /// Triplet encoder plus the projected document bag of words.
    Dual,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Base,
        Variant::LocT,
        Variant::LocE,
        Variant::GlobB,
        Variant::GlobE,
        Variant::Dual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::LocT => "loc_t",
            Variant::LocE => "loc_e",
            Variant::GlobB => "glob_b",
            Variant::GlobE => "glob_e",
            Variant::Dual => "dual",
        }
    }

    pub fn segment_rows(self) -> usize {
        match self {
            Variant::LocT | Variant::Dual => 4,
            _ => 2,
        }
    }

    pub fn encoders(self) -> usize {
        if self == Variant::LocE {
            3
        } else {
            1
        }
    }

    pub fn uses_triplet(self) -> bool {
        matches!(self, Variant::LocT | Variant::Dual)
    }

    pub fn uses_bow(self) -> bool {
        matches!(self, Variant::GlobB | Variant::Dual)
    }

    pub fn uses_global(self) -> bool {
        matches!(self, Variant::GlobB | Variant::GlobE | Variant::Dual)
    }

    /// Width of the scoring layer's input, in units of `d_model`.
    pub fn head_blocks(self) -> usize {
        match self {
            Variant::Base | Variant::LocT => 1,
            Variant::LocE => 3,
            Variant::GlobB | Variant::GlobE | Variant::Dual => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Architecture hyper-parameters plus the seeds that fix initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub init_std: f64,
    pub seed: u64,
    pub projection_seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, vocab_size: usize) -> Self {
        Self {
            variant,
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            max_len: 64,
            init_std: 0.02,
            seed: 0,
            projection_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.d_model < 2 {
            return Err(Error::Config("d_model must be >= 2".into()));
        }
        let min_len = if self.variant.uses_triplet() {
            crate::encode::MIN_TRIPLET_LEN
        } else {
            crate::encode::MIN_PAIR_LEN
        };
        if self.max_len < min_len {
            return Err(Error::Config(format!(
                "max_len {} is below {min_len} for {}",
                self.max_len, self.variant
            )));
        }
        if self.vocab_size < crate::text::RESERVED.len() {
            return Err(Error::Config("vocab_size below the reserved tokens".into()));
        }
        if self.d_ff == 0 {
            return Err(Error::Config("d_ff must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Head {
    w: ParamId,
    b: ParamId,
}

/// A trainable ranker: configuration, vocabulary and parameters.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocabulary,
    params: ParamStore,
    encoders: Vec<EncoderParams>,
    head: Head,
}

/// Token-level model input for one (question, candidate) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedInput {
    pub sequences: Vec<TokenSequence>,
    pub global: Option<Tensor>,
}

impl Model {
    /// Fresh model: N(0, init_std) weights and embeddings, zero biases and
    /// shifts, unit layer-norm scales, drawn in parameter order from
    /// ChaCha8 seeded with `config.seed`.
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        if config.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "config vocab_size {} but vocabulary has {} tokens",
                config.vocab_size,
                vocab.len()
            )));
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut init = encoder::Init { rng: &mut rng, std: config.init_std };
        let mut params = ParamStore::new();
        let variant = config.variant;
        let shared_cls = (variant == Variant::LocE)
            .then(|| params.insert("shared.cls", init.gaussian(&[config.d_model])));
        let encoders = (0..variant.encoders())
            .map(|i| {
                encoder::init_encoder(
                    &mut params,
                    &format!("encoder{i}"),
                    &config,
                    variant.segment_rows(),
                    shared_cls,
                    &mut init,
                )
            })
            .collect();
        let width = variant.head_blocks() * config.d_model;
        let head = Head {
            w: params.insert("head.w", init.gaussian(&[width, 1])),
            b: params.insert("head.b", Tensor::zeros(&[1])),
        };
        Ok(Self { config, vocab, params, encoders, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoders(&self) -> &[EncoderParams] {
        &self.encoders
    }

    pub fn head_weight(&self) -> ParamId {
        self.head.w
    }

    pub fn head_bias(&self) -> ParamId {
        self.head.b
    }

    /// Replaces every parameter tensor; names and shapes must match.
    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        self.params.check_compatible(&params)?;
        self.params = params;
        Ok(())
    }

    fn ids(&self, text: &str) -> Vec<usize> {
        self.vocab.encode_tokens(&tokenize(text))
    }

    /// Token sequences for one candidate, without the global feature.
    pub fn sequences(&self, question: &str, c: &Candidate) -> Result<Vec<TokenSequence>> {
        let q = self.ids(question);
        let s = self.ids(&c.sentence);
        let prev = c.prev.as_deref().map(|t| self.ids(t)).unwrap_or_default();
        let next = c.next.as_deref().map(|t| self.ids(t)).unwrap_or_default();
        let max_len = self.config.max_len;
        Ok(match self.config.variant {
            Variant::LocT | Variant::Dual => {
                vec![assemble_triplet(&q, &prev, &s, &next, max_len)?]
            }
            Variant::LocE => vec![
                assemble_pair(&q, &prev, max_len)?,
                assemble_pair(&q, &s, max_len)?,
                assemble_pair(&q, &next, max_len)?,
            ],
            Variant::Base | Variant::GlobB | Variant::GlobE => {
                vec![assemble_pair(&q, &s, max_len)?]
            }
        })
    }

    pub fn prepare(&self, question: &str, c: &Candidate, aux: &Aux) -> Result<PreparedInput> {
        let sequences = self.sequences(question, c)?;
        let global = if self.config.variant.uses_global() {
            let features = aux.global.as_ref().ok_or_else(|| {
                Error::Config(format!("variant {} needs document features", self.config.variant))
            })?;
            let f = features.get(&c.doc_id).ok_or_else(|| {
                Error::Integrity(format!("no document features for {}", c.doc_id))
            })?;
            if f.len() != self.config.d_model {
                return Err(Error::Compatibility(format!(
                    "document feature width {} differs from d_model {}",
                    f.len(),
                    self.config.d_model
                )));
            }
            Some(f.clone())
        } else {
            None
        };
        Ok(PreparedInput { sequences, global })
    }

    pub fn prepare_group(&self, group: &QuestionGroup, aux: &Aux) -> Result<Vec<PreparedInput>> {
        group
            .candidates
            .iter()
            .map(|c| self.prepare(&group.question, c, aux))
            .collect()
    }

    /// Records the scoring function on `tape`; returns the `[1]` logit node.
    pub fn logit_on_tape<'a>(&'a self, tape: &mut Tape<'a>, input: &PreparedInput) -> Result<NodeId> {
        if input.sequences.len() != self.encoders.len() {
            return Err(Error::Input(format!(
                "{} sequences for {} encoders",
                input.sequences.len(),
                self.encoders.len()
            )));
        }
        let mut parts = Vec::with_capacity(self.config.variant.head_blocks());
        for (enc, seq) in self.encoders.iter().zip(&input.sequences) {
            parts.push(encoder::encode_on_tape(tape, &self.params, enc, &self.config, seq)?);
        }
        match (&input.global, self.config.variant.uses_global()) {
            (Some(g), true) => parts.push(tape.leaf(g.clone())),
            (None, true) => {
                return Err(Error::Config(format!(
                    "variant {} needs a document feature",
                    self.config.variant
                )))
            }
            (_, false) => {}
        }
        let feature = if parts.len() == 1 { parts[0] } else { tape.concat(&parts)? };
        let w = tape.param(&self.params, self.head.w);
        let b = tape.param(&self.params, self.head.b);
        tape.affine(feature, w, b)
    }

    pub fn logit(&self, input: &PreparedInput) -> Result<f64> {
        let mut tape = Tape::new();
        let z = self.logit_on_tape(&mut tape, input)?;
        tape.value(z).item()
    }

    /// Logit for one candidate of a question.
    pub fn score(&self, question: &str, c: &Candidate, aux: &Aux) -> Result<f64> {
        self.logit(&self.prepare(question, c, aux)?)
    }

    /// `[CLS]` vector of the first encoder for a single sequence.
    pub fn encode_sequence(&self, seq: &TokenSequence) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = encoder::encode_on_tape(&mut tape, &self.params, &self.encoders[0], &self.config, seq)?;
        Ok(tape.value(out).clone())
    }

    /// Ranks the candidates of `group` by descending logit.
    pub fn rank(&self, group: &QuestionGroup, aux: &Aux) -> Result<Ranking> {
        let logits = self
            .prepare_group(group, aux)?
            .iter()
            .map(|p| self.logit(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ranking::new(group, logits))
    }
}

/// Candidate order for one question.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub logits: Vec<f64>,
}

impl Ranking {
    pub fn new(group: &QuestionGroup, logits: Vec<f64>) -> Self {
        let sent: Vec<usize> = group.candidates.iter().map(|c| c.sent_index).collect();
        Self { order: rank_by_logits(&logits, &sent), logits }
    }

    /// Index of the selected answer.
    pub fn selected(&self) -> usize {
        self.order[0]
    }

    /// Labels in ranked order.
    pub fn ranked_labels(&self, group: &QuestionGroup) -> Vec<u8> {
        self.order.iter().map(|&i| group.candidates[i].label).collect()
    }
}

/// Descending logit; ties go to the lower sentence index, then to the earlier
/// candidate.
pub fn rank_by_logits(logits: &[f64], sent_indices: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| {
        logits[b]
            .total_cmp(&logits[a])
            .then(sent_indices[a].cmp(&sent_indices[b]))
            .then(a.cmp(&b))
    });
    order
}
