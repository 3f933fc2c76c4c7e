//! Model inputs: token/position/segment sequences and the projected
//! document bag of words.
//!
//! Pair layout: `[CLS] q [SEP] s [EOS]`, segments `0 … 0 | 1 … 1`.
//! Triplet layout: `[CLS] q [SEP] prev [SEP] s [SEP] next [EOS]`, segments
//! `0 | 1 | 2 | 3`, where each delimiter belongs to the block it closes. An
//! absent neighbor contributes no tokens but keeps its delimiter.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::text::{CLS_ID, EOS_ID, PAD_ID, SEP_ID};

pub const MIN_PAIR_LEN: usize = 8;
pub const MIN_TRIPLET_LEN: usize = 10;

/// One model input, padded to a fixed length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub token_ids: Vec<usize>,
    pub position_ids: Vec<usize>,
    pub segment_ids: Vec<usize>,
    pub mask: Vec<u8>,
}

impl TokenSequence {
    fn from_blocks(blocks: &[(usize, Vec<usize>)], max_len: usize) -> Self {
        let mut token_ids = Vec::with_capacity(max_len);
        let mut segment_ids = Vec::with_capacity(max_len);
        for (seg, toks) in blocks {
            token_ids.extend_from_slice(toks);
            segment_ids.extend(std::iter::repeat_n(*seg, toks.len()));
        }
        let valid = token_ids.len();
        let last_seg = blocks.last().map_or(0, |b| b.0);
        token_ids.resize(max_len, PAD_ID);
        segment_ids.resize(max_len, last_seg);
        let mut mask = vec![1u8; valid];
        mask.resize(max_len, 0);
        Self {
            token_ids,
            position_ids: (0..max_len).collect(),
            segment_ids,
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of leading unmasked positions.
    pub fn valid_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m == 1).count()
    }
}

fn block(open: Option<usize>, body: &[usize], close: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(body.len() + 2);
    v.extend(open);
    v.extend_from_slice(body);
    v.push(close);
    v
}

/// `[CLS] q [SEP] s [EOS]`. The answer is cut from the right first; the
/// question keeps at least one token.
pub fn assemble_pair(q: &[usize], s: &[usize], max_len: usize) -> Result<TokenSequence> {
    if max_len < MIN_PAIR_LEN {
        return Err(Error::Config(format!("pair max_len must be >= {MIN_PAIR_LEN}")));
    }
    if q.is_empty() {
        return Err(Error::Input("empty question".into()));
    }
    let budget = max_len - 3;
    let s_len = s.len().min(budget.saturating_sub(q.len()));
    let q_len = q.len().min(budget - s_len);
    Ok(TokenSequence::from_blocks(
        &[
            (0, block(Some(CLS_ID), &q[..q_len], SEP_ID)),
            (1, block(None, &s[..s_len], EOS_ID)),
        ],
        max_len,
    ))
}

/// `[CLS] q [SEP] prev [SEP] s [SEP] next [EOS]`. Overlong inputs lose the
/// tail of `next`, then the head of `prev`, then the tail of `s`, then the
/// tail of `q` down to one token.
pub fn assemble_triplet(
    q: &[usize],
    prev: &[usize],
    s: &[usize],
    next: &[usize],
    max_len: usize,
) -> Result<TokenSequence> {
    if max_len < MIN_TRIPLET_LEN {
        return Err(Error::Config(format!("triplet max_len must be >= {MIN_TRIPLET_LEN}")));
    }
    if q.is_empty() {
        return Err(Error::Input("empty question".into()));
    }
    let budget = max_len - 5;
    let mut lens = [q.len(), prev.len(), s.len(), next.len()];
    let mut excess = lens.iter().sum::<usize>().saturating_sub(budget);
    for (slot, floor) in [(3, 0), (1, 0), (2, 0), (0, 1)] {
        let cut = excess.min(lens[slot] - floor);
        lens[slot] -= cut;
        excess -= cut;
    }
    let prev_kept = &prev[prev.len() - lens[1]..];
    Ok(TokenSequence::from_blocks(
        &[
            (0, block(Some(CLS_ID), &q[..lens[0]], SEP_ID)),
            (1, block(None, prev_kept, SEP_ID)),
            (2, block(None, &s[..lens[2]], SEP_ID)),
            (3, block(None, &next[..lens[3]], EOS_ID)),
        ],
        max_len,
    ))
}

/// `[CLS] s [EOS]`, used to embed document sentences on their own.
pub fn assemble_single(s: &[usize], max_len: usize) -> Result<TokenSequence> {
    if max_len < 3 {
        return Err(Error::Config("single-sentence max_len must be >= 3".into()));
    }
    let s_len = s.len().min(max_len - 2);
    Ok(TokenSequence::from_blocks(
        &[(0, block(Some(CLS_ID), &s[..s_len], EOS_ID))],
        max_len,
    ))
}

/// Frozen Gaussian map from vocabulary space to the model width.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    matrix: Tensor,
    seed: u64,
}

impl ProjectionMatrix {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn row(&self, token: usize) -> &[f64] {
        self.matrix.row(token)
    }
}

/// Entries i.i.d. `N(0, 1/d_model)`, drawn row-major from ChaCha8 seeded
/// with `seed`.
pub fn make_projection(vocab_size: usize, d_model: usize, seed: u64) -> Result<ProjectionMatrix> {
    if d_model == 0 {
        return Err(Error::Config("projection width must be >= 1".into()));
    }
    let normal = Normal::new(0.0, 1.0 / (d_model as f64).sqrt()).expect("valid std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..vocab_size * d_model).map(|_| normal.sample(&mut rng)).collect();
    Ok(ProjectionMatrix {
        matrix: Tensor::matrix(vocab_size, d_model, data)?,
        seed,
    })
}

/// `Σ count(t)·R[t]`, L2-normalized; an empty bag maps to the zero vector.
pub fn project_bow(bow: &BTreeMap<usize, f64>, r: &ProjectionMatrix) -> Result<Tensor> {
    let d = r.width();
    let mut v = vec![0.0; d];
    for (&token, &count) in bow {
        if token >= r.vocab_size() {
            return Err(Error::Index { index: token, extent: r.vocab_size() });
        }
        if count < 0.0 {
            return Err(Error::Input(format!("negative count for token {token}")));
        }
        for (o, x) in v.iter_mut().zip(r.row(token)) {
            *o += count * x;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    Ok(Tensor::vector(v))
}

/// Token, position and segment tables.
#[derive(Clone, Debug)]
pub struct EmbeddingTables {
    pub token: Tensor,
    pub position: Tensor,
    pub segment: Tensor,
}

/// Row `j` = `token[token_ids[j]] + position[j] + segment[segment_ids[j]]`.
pub fn embed(seq: &TokenSequence, tables: &EmbeddingTables) -> Result<Tensor> {
    let d = tables.token.cols();
    if tables.position.cols() != d || tables.segment.cols() != d {
        return Err(Error::dim("embedding tables differ in width"));
    }
    let mut out = Tensor::zeros(&[seq.len(), d]);
    for j in 0..seq.len() {
        let lookups = [
            (&tables.token, seq.token_ids[j]),
            (&tables.position, seq.position_ids[j]),
            (&tables.segment, seq.segment_ids[j]),
        ];
        for (table, id) in lookups {
            if id >= table.rows() {
                return Err(Error::Index { index: id, extent: table.rows() });
            }
        }
        let row = out.row_mut(j);
        for (table, id) in lookups {
            for (o, v) in row.iter_mut().zip(table.row(id)) {
                *o += v;
            }
        }
    }
    Ok(out)
}
