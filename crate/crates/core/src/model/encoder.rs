//! Pre-norm transformer encoder pooled at `[CLS]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::encode::TokenSequence;
use crate::error::{Error, Result};
use crate::numerics::{NodeId, ParamId, ParamStore, Tape, Tensor, LAYER_NORM_EPS};
use crate::text::CLS_ID;

#[derive(Clone, Debug)]
pub(crate) struct LayerParams {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Parameter handles of one encoder.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub(crate) token: ParamId,
    pub(crate) position: ParamId,
    pub(crate) segment: ParamId,
    pub(crate) layers: Vec<LayerParams>,
    /// When set, every `[CLS]` position reads this vector instead of the
    /// encoder's own token-table row.
    pub(crate) shared_cls: Option<ParamId>,
    pub(crate) prefix: String,
}

impl EncoderParams {
    /// Names of every parameter owned by this encoder alone.
    pub fn own_params(&self, store: &ParamStore) -> Vec<ParamId> {
        store
            .iter()
            .filter(|(_, name, _)| name.starts_with(&format!("{}.", self.prefix)))
            .map(|(id, _, _)| id)
            .collect()
    }
}

pub(crate) struct Init<'r, R: Rng> {
    pub rng: &'r mut R,
    pub std: f64,
}

impl<R: Rng> Init<'_, R> {
    pub fn gaussian(&mut self, shape: &[usize]) -> Tensor {
        let normal = Normal::new(0.0, self.std).expect("valid std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| normal.sample(self.rng)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches")
    }
}

pub(crate) fn init_encoder<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    cfg: &ModelConfig,
    segment_rows: usize,
    shared_cls: Option<ParamId>,
    init: &mut Init<'_, R>,
) -> EncoderParams {
    let d = cfg.d_model;
    let token = store.insert(format!("{prefix}.token"), init.gaussian(&[cfg.vocab_size, d]));
    let position = store.insert(format!("{prefix}.position"), init.gaussian(&[cfg.max_len, d]));
    let segment = store.insert(format!("{prefix}.segment"), init.gaussian(&[segment_rows, d]));
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let p = format!("{prefix}.layer{l}");
        let mut w = |store: &mut ParamStore, name: &str, shape: &[usize]| {
            store.insert(format!("{p}.{name}"), init.gaussian(shape))
        };
        let ones = |n: usize| Tensor::filled(&[n], 1.0);
        let zeros = |n: usize| Tensor::zeros(&[n]);
        let ln1_g = store.insert(format!("{p}.ln1.gamma"), ones(d));
        let ln1_b = store.insert(format!("{p}.ln1.beta"), zeros(d));
        let wq = w(store, "attn.wq", &[d, d]);
        let bq = store.insert(format!("{p}.attn.bq"), zeros(d));
        let wk = w(store, "attn.wk", &[d, d]);
        let bk = store.insert(format!("{p}.attn.bk"), zeros(d));
        let wv = w(store, "attn.wv", &[d, d]);
        let bv = store.insert(format!("{p}.attn.bv"), zeros(d));
        let wo = w(store, "attn.wo", &[d, d]);
        let bo = store.insert(format!("{p}.attn.bo"), zeros(d));
        let ln2_g = store.insert(format!("{p}.ln2.gamma"), ones(d));
        let ln2_b = store.insert(format!("{p}.ln2.beta"), zeros(d));
        let w1 = w(store, "ffn.w1", &[d, cfg.d_ff]);
        let b1 = store.insert(format!("{p}.ffn.b1"), zeros(cfg.d_ff));
        let w2 = w(store, "ffn.w2", &[cfg.d_ff, d]);
        let b2 = store.insert(format!("{p}.ffn.b2"), zeros(d));
        layers.push(LayerParams {
            ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2,
        });
    }
    EncoderParams {
        token,
        position,
        segment,
        layers,
        shared_cls,
        prefix: prefix.to_string(),
    }
}

/// Records the encoder on `tape` and returns the final `[CLS]` vector.
///
/// Positions past the last unmasked token are dropped before the first
/// layer, and the last layer is evaluated for the `[CLS]` query only. Neither
/// changes the pooled output: masked keys get zero attention weight and no
/// other row feeds the last layer's `[CLS]` row.
pub(crate) fn encode_on_tape<'a>(
    tape: &mut Tape<'a>,
    store: &'a ParamStore,
    enc: &EncoderParams,
    cfg: &ModelConfig,
    seq: &TokenSequence,
) -> Result<NodeId> {
    let len = seq.mask.iter().rposition(|&m| m == 1).map_or(0, |p| p + 1);
    if len == 0 || seq.mask[0] != 1 {
        return Err(Error::Input("sequence must start with an unmasked [CLS]".into()));
    }
    let keep: Vec<bool> = seq.mask[..len].iter().map(|&m| m == 1).collect();
    let keep = if keep.iter().all(|&k| k) { None } else { Some(keep) };

    let tok_table = tape.param(store, enc.token);
    let mut tok = tape.gather(tok_table, &seq.token_ids[..len])?;
    if let Some(shared) = enc.shared_cls {
        let rows: Vec<usize> = (0..len).filter(|&j| seq.token_ids[j] == CLS_ID).collect();
        let cls = tape.param(store, shared);
        tok = tape.replace_rows(tok, &rows, cls)?;
    }
    let pos_table = tape.param(store, enc.position);
    let pos = tape.gather(pos_table, &seq.position_ids[..len])?;
    let seg_table = tape.param(store, enc.segment);
    let seg = tape.gather(seg_table, &seq.segment_ids[..len])?;
    let x = tape.add(tok, pos)?;
    let mut x = tape.add(x, seg)?;

    let heads = cfg.n_heads;
    let dh = cfg.d_model / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    for (l, lp) in enc.layers.iter().enumerate() {
        let last = l + 1 == enc.layers.len();
        let mut p = |id: ParamId| tape.param(store, id);
        let (g1, b1n, wq, bq, wk, bk, wv, bv, wo, bo) = (
            p(lp.ln1_g), p(lp.ln1_b), p(lp.wq), p(lp.bq), p(lp.wk),
            p(lp.bk), p(lp.wv), p(lp.bv), p(lp.wo), p(lp.bo),
        );
        let (g2, b2n, w1, fb1, w2, fb2) =
            (p(lp.ln2_g), p(lp.ln2_b), p(lp.w1), p(lp.b1), p(lp.w2), p(lp.b2));

        let h = tape.layer_norm(x, g1, b1n, LAYER_NORM_EPS)?;
        let q_in = if last { tape.select_rows(h, &[0])? } else { h };
        let q = tape.affine(q_in, wq, bq)?;
        let k = tape.affine(h, wk, bk)?;
        let v = tape.affine(h, wv, bv)?;
        let mut outs = Vec::with_capacity(heads);
        for hd in 0..heads {
            let qh = tape.slice_cols(q, hd * dh, dh)?;
            let kh = tape.slice_cols(k, hd * dh, dh)?;
            let vh = tape.slice_cols(v, hd * dh, dh)?;
            let scores = tape.matmul_nt(qh, kh)?;
            let scores = tape.scale(scores, scale)?;
            let probs = tape.masked_softmax(scores, keep.as_deref())?;
            outs.push(tape.matmul(probs, vh)?);
        }
        let attn = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        let o = tape.affine(attn, wo, bo)?;
        let resid = if last { tape.select_rows(x, &[0])? } else { x };
        let x1 = tape.add(resid, o)?;

        let h2 = tape.layer_norm(x1, g2, b2n, LAYER_NORM_EPS)?;
        let f = tape.affine(h2, w1, fb1)?;
        let f = tape.gelu(f)?;
        let f = tape.affine(f, w2, fb2)?;
        x = tape.add(x1, f)?;
    }
    tape.row(x, 0)
}
