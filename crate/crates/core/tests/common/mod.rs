//! Oracles shared by the integration tests: central finite differences and a
//! brute-force ranking evaluation.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ctxrank::data::{attach_context, As2Corpus, Candidate, Document, QuestionGroup};
use ctxrank::model::{Aux, DocEncoder, Model, ModelConfig, Variant};
use ctxrank::numerics::{Tape, Tensor};
use ctxrank::text::build_vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, so that entries whose true
/// gradient is (numerically) zero are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xs[i];
            xs[i] = orig + H;
            let up = f(&xs);
            xs[i] = orig - H;
            let down = f(&xs);
            xs[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Weighted sum `Σ out ⊙ r` that turns any output into a scalar loss whose
/// gradient exercises every output entry.
pub fn project<'a>(tape: &mut Tape<'a>, out: ctxrank::numerics::NodeId, seed: u64) -> ctxrank::numerics::NodeId {
    let shape = tape.value(out).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = tape.leaf(random_tensor(&mut rng, &shape, 1.0));
    let prod = tape.mul(out, r).unwrap();
    tape.sum(prod).unwrap()
}

// ---------------------------------------------------------------------------
// Fixture corpora and models

pub fn doc(id: &str, sentences: &[&str]) -> Document {
    Document { doc_id: id.into(), title: None, sentences: sentences.iter().map(|s| s.to_string()).collect() }
}

pub fn cand(d: &Document, i: usize, label: u8) -> Candidate {
    Candidate {
        sentence: d.sentences[i].clone(),
        prev: None,
        next: None,
        doc_id: d.doc_id.clone(),
        sent_index: i,
        label,
    }
}

/// Two short documents and one question over three candidates, including a
/// boundary candidate (no prev) and candidates from both documents.
pub fn tiny_corpus() -> As2Corpus {
    let a = doc("a", &["ann sang .", "she won .", "bob ran ."]);
    let b = doc("b", &["cy hid .", "he slept well ."]);
    let group = QuestionGroup {
        question_id: "q".into(),
        question: "who won ?".into(),
        candidates: vec![cand(&a, 0, 0), cand(&a, 1, 1), cand(&b, 1, 0)],
    };
    let mut documents = BTreeMap::new();
    documents.insert(a.doc_id.clone(), a);
    documents.insert(b.doc_id.clone(), b);
    attach_context(&As2Corpus { groups: vec![group], documents }).unwrap()
}

pub fn tiny_config(variant: Variant, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        max_len: 16,
        init_std: 0.5,
        seed: 11,
        ..ModelConfig::new(variant, vocab_size)
    }
}

/// A d_model=8 model of `variant` over `corpus`, with the auxiliary inputs
/// it needs (a random base model serves as `glob_e`'s encoder).
pub fn tiny_model(variant: Variant, corpus: &As2Corpus) -> (Model, Aux) {
    let texts: Vec<&str> = corpus
        .documents
        .values()
        .flat_map(|d| d.sentences.iter().map(String::as_str))
        .chain(corpus.groups.iter().map(|g| g.question.as_str()))
        .collect();
    let vocab = build_vocab(texts, 100, 1).unwrap();
    let model = Model::new(tiny_config(variant, vocab.len()), vocab.clone()).unwrap();
    let enc = (variant == Variant::GlobE).then(|| {
        let cfg = ModelConfig { seed: 99, ..tiny_config(Variant::Base, vocab.len()) };
        DocEncoder::new(Model::new(cfg, vocab).unwrap()).unwrap()
    });
    let aux = model.build_aux(&corpus.documents, enc.as_ref()).unwrap();
    (model, aux)
}

/// Mean BCE of the model over every candidate of `corpus`.
pub fn corpus_loss<'a>(model: &'a Model, tape: &mut Tape<'a>, corpus: &As2Corpus, aux: &Aux) -> ctxrank::numerics::NodeId {
    let mut logits = Vec::new();
    let mut labels = Vec::new();
    for g in &corpus.groups {
        for c in &g.candidates {
            let input = model.prepare(&g.question, c, aux).unwrap();
            logits.push(model.logit_on_tape(tape, &input).unwrap());
            labels.push(f64::from(c.label));
        }
    }
    let z = tape.concat(&logits).unwrap();
    tape.bce_with_logits(z, &labels).unwrap()
}

/// Max relative error between backprop and central differences over every
/// parameter entry of `model`.
pub fn model_gradient_error(model: &Model, corpus: &As2Corpus, aux: &Aux) -> f64 {
    let analytic: Vec<(usize, Tensor)> = {
        let mut tape = Tape::new();
        let loss = corpus_loss(model, &mut tape, corpus, aux);
        let grads = tape.backward(loss).unwrap();
        model
            .params()
            .ids()
            .map(|id| {
                let g = grads
                    .param(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(model.params().get(id).shape()));
                (id.0, g)
            })
            .collect()
    };
    let loss_at = |m: &Model| {
        let mut tape = Tape::new();
        let l = corpus_loss(m, &mut tape, corpus, aux);
        tape.value(l).item().unwrap()
    };
    let mut worst: f64 = 0.0;
    let mut m = model.clone();
    for (idx, g) in analytic {
        let id = ctxrank::numerics::ParamId(idx);
        for k in 0..g.len() {
            let orig = m.params().get(id).data()[k];
            m.params_mut().get_mut(id).data_mut()[k] = orig + H;
            let up = loss_at(&m);
            m.params_mut().get_mut(id).data_mut()[k] = orig - H;
            let down = loss_at(&m);
            m.params_mut().get_mut(id).data_mut()[k] = orig;
            worst = worst.max(rel_err(g.data()[k], (up - down) / (2.0 * H)));
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Ranking oracle

/// Reference ranking: repeatedly take the best remaining candidate, where
/// "best" is the largest logit, then the smaller sentence index, then the
/// earlier position.
pub fn brute_force_order(logits: &[f64], sent: &[usize]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..logits.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for j in 1..left.len() {
            let (a, b) = (left[j], left[best]);
            let better = logits[a] > logits[b]
                || (logits[a] == logits[b] && (sent[a] < sent[b] || (sent[a] == sent[b] && a < b)));
            if better {
                best = j;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// AP straight from its definition: the mean, over positives, of the
/// fraction of positives among the items ranked at or above it.
pub fn brute_force_ap(ranked: &[u8]) -> Option<f64> {
    let positions: Vec<usize> = (0..ranked.len()).filter(|&k| ranked[k] == 1).collect();
    if positions.is_empty() {
        return None;
    }
    let total: f64 = positions
        .iter()
        .map(|&k| ranked[..=k].iter().filter(|&&l| l == 1).count() as f64 / (k + 1) as f64)
        .sum();
    Some(total / positions.len() as f64)
}
