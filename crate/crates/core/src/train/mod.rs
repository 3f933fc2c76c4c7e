//! Pointwise BCE training with Adam and a warmup/decay schedule, repeated
//! runs, and sequential fine-tuning over several corpora.

mod adam;
mod schedule;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::As2Corpus;
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, evaluate_logits, EpochMetrics};
use crate::model::{Aux, Checkpoint, CheckpointMeta, DocEncoder, Model, ModelConfig, PreparedInput, Variant};
use crate::numerics::{ParamStore, Tape};
use crate::text::{build_vocab, Vocabulary, DEFAULT_MAX_SIZE, DEFAULT_MIN_COUNT};

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use schedule::{bce_loss, Schedule};

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub init_std: f64,
    pub lr_peak: f64,
    /// Defaults to 10% of `total_steps`.
    pub warmup_steps: Option<usize>,
    /// Defaults to `epochs` times the number of minibatches per epoch.
    pub total_steps: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub projection_seed: u64,
    pub runs: usize,
    pub vocab_max_size: usize,
    pub vocab_min_count: usize,
    /// Epochs for the base model trained as `glob_e`'s document encoder;
    /// defaults to `epochs`.
    pub doc_encoder_epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Base,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            max_len: 64,
            init_std: 0.02,
            lr_peak: 3e-4,
            warmup_steps: None,
            total_steps: None,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            projection_seed: 1,
            runs: 4,
            vocab_max_size: DEFAULT_MAX_SIZE,
            vocab_min_count: DEFAULT_MIN_COUNT,
            doc_encoder_epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr_peak.is_finite() && self.lr_peak >= 0.0) {
            return Err(Error::Config(format!("lr_peak {} must be finite and >= 0", self.lr_peak)));
        }
        if let (Some(w), Some(t)) = (self.warmup_steps, self.total_steps) {
            if w > t {
                return Err(Error::Config(format!("warmup_steps {w} exceeds total_steps {t}")));
            }
        }
        self.model_config(crate::text::RESERVED.len(), 0).validate()
    }

    pub fn model_config(&self, vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_len: self.max_len,
            init_std: self.init_std,
            seed,
            projection_seed: self.projection_seed,
        }
    }

    pub fn batches_per_epoch(&self, pairs: usize) -> usize {
        pairs.div_ceil(self.batch_size)
    }

    /// Schedule with the defaults filled in for a corpus of `pairs` pairs.
    pub fn schedule(&self, pairs: usize) -> Result<Schedule> {
        let total = self.total_steps.unwrap_or(self.epochs * self.batches_per_epoch(pairs));
        let warmup = self.warmup_steps.unwrap_or(total / 10);
        if warmup > total {
            return Err(Error::Config(format!("warmup_steps {warmup} exceeds total_steps {total}")));
        }
        Ok(Schedule { peak: self.lr_peak, warmup, total })
    }

    /// Copy with every optional field resolved, as recorded in manifests.
    pub fn resolved(&self, pairs: usize) -> Result<Self> {
        let s = self.schedule(pairs)?;
        Ok(Self {
            warmup_steps: Some(s.warmup),
            total_steps: Some(s.total),
            doc_encoder_epochs: Some(self.doc_encoder_epochs.unwrap_or(self.epochs)),
            ..self.clone()
        })
    }

    fn same_architecture(&self, other: &Self) -> bool {
        (self.variant, self.d_model, self.n_layers, self.n_heads, self.d_ff, self.max_len)
            == (other.variant, other.d_model, other.n_layers, other.n_heads, other.d_ff, other.max_len)
            && self.projection_seed == other.projection_seed
    }
}

/// Vocabulary over the questions and document sentences of `corpora`.
pub fn corpus_vocab(corpora: &[&As2Corpus], cfg: &TrainConfig) -> Result<Vocabulary> {
    let texts = corpora.iter().flat_map(|c| {
        c.groups
            .iter()
            .map(|g| g.question.as_str())
            .chain(c.documents.values().flat_map(|d| d.sentences.iter().map(String::as_str)))
            .chain(c.groups.iter().flat_map(|g| {
                g.candidates.iter().flat_map(|cand| {
                    std::iter::once(cand.sentence.as_str())
                        .chain(cand.prev.as_deref())
                        .chain(cand.next.as_deref())
                })
            }))
    });
    build_vocab(texts, cfg.vocab_max_size, cfg.vocab_min_count)
}

/// Outcome of one training run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub schedule: Schedule,
    /// Dev metrics after each completed epoch (epochs are 1-based).
    pub metrics: Vec<EpochMetrics>,
    /// Mean per-pair training loss of each completed epoch.
    pub train_loss: Vec<f64>,
    pub initial_params: ParamStore,
    pub final_model: Model,
    pub best_model: Model,
    /// 0 when no epoch completed.
    pub best_epoch: usize,
    pub doc_encoder: Option<DocEncoder>,
    /// Set when training stopped on a non-finite loss or gradient;
    /// `final_model` then holds the last finite parameters.
    pub divergence: Option<String>,
}

impl RunResult {
    fn checkpoint(&self, model: &Model, epoch: usize) -> Checkpoint {
        let dev_map = epoch.checked_sub(1).and_then(|e| self.metrics.get(e)).map(|m| m.map);
        Checkpoint::from_model(model, self.doc_encoder.as_ref()).with_meta(CheckpointMeta {
            train_seed: Some(self.seed),
            epoch: Some(epoch),
            dev_map,
        })
    }

    pub fn final_checkpoint(&self) -> Checkpoint {
        self.checkpoint(&self.final_model, self.metrics.len())
    }

    pub fn best_checkpoint(&self) -> Checkpoint {
        self.checkpoint(&self.best_model, self.best_epoch)
    }
}

struct Example {
    input: PreparedInput,
    label: f64,
}

fn prepare_pairs(model: &Model, corpus: &As2Corpus, aux: &Aux) -> Result<Vec<Example>> {
    let mut out = Vec::with_capacity(corpus.pairs());
    for g in &corpus.groups {
        for c in &g.candidates {
            out.push(Example { input: model.prepare(&g.question, c, aux)?, label: f64::from(c.label) });
        }
    }
    Ok(out)
}

fn dev_logits(model: &Model, dev: &[Vec<PreparedInput>]) -> Result<Vec<Vec<f64>>> {
    dev.iter()
        .map(|g| g.iter().map(|p| model.logit(p)).collect())
        .collect()
}

/// Mean BCE over `batch` and its parameter gradients, applied with Adam.
fn train_batch(
    model: &mut Model,
    batch: &[&Example],
    state: &mut AdamState,
    lr: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = {
        let m: &Model = model;
        let mut logits = Vec::with_capacity(batch.len());
        for ex in batch {
            logits.push(m.logit_on_tape(&mut tape, &ex.input)?);
        }
        let z = if logits.len() == 1 { logits[0] } else { tape.concat(&logits)? };
        let labels: Vec<f64> = batch.iter().map(|e| e.label).collect();
        tape.bce_with_logits(z, &labels)?
    };
    let value = tape.value(loss).item()?;
    let grads = tape.backward(loss)?;
    let owned: Vec<_> = grads.params().into_iter().map(|(id, g)| (id, g.clone())).collect();
    drop(grads);
    drop(tape);
    let refs: Vec<_> = owned.iter().map(|(id, g)| (*id, g)).collect();
    adam_step(model.params_mut(), &refs, state, lr)?;
    Ok(value)
}

/// Trains `model` in place on `train`, evaluating on `dev` after every epoch.
fn fit(
    model: Model,
    train: &As2Corpus,
    dev: &As2Corpus,
    cfg: &TrainConfig,
    seed: u64,
    doc_encoder: Option<DocEncoder>,
) -> Result<RunResult> {
    cfg.validate()?;
    if train.pairs() == 0 {
        return Err(Error::Input("training corpus has no pairs".into()));
    }
    let schedule = cfg.schedule(train.pairs())?;
    let train_aux = model.build_aux(&train.documents, doc_encoder.as_ref())?;
    let dev_aux = model.build_aux(&dev.documents, doc_encoder.as_ref())?;
    let examples = prepare_pairs(&model, train, &train_aux)?;
    let dev_inputs: Vec<Vec<PreparedInput>> = dev
        .groups
        .iter()
        .map(|g| model.prepare_group(g, &dev_aux))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut state = AdamState::new(model.params());
    let initial_params = model.params().clone();
    let mut model = model;
    let mut best_model = model.clone();
    let mut best: Option<(usize, f64)> = None;
    let mut metrics = Vec::new();
    let mut train_loss = Vec::new();
    let mut divergence = None;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            match train_batch(&mut model, &batch, &mut state, schedule.lr_at(step)) {
                Ok(l) => loss_sum += l * batch.len() as f64,
                Err(Error::NonFinite(msg)) => {
                    divergence = Some(format!("epoch {epoch}, step {step}: {msg}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            step += 1;
        }
        let mean_loss = loss_sum / examples.len() as f64;
        let mut m = evaluate_logits(dev, &dev_logits(&model, &dev_inputs)?)?.metrics;
        m.epoch = epoch;
        log::info!(
            "{} seed {seed} epoch {epoch}: loss {mean_loss:.6} dev map {:.4} p@1 {:.4}",
            cfg.variant,
            m.map,
            m.p1
        );
        if best.is_none_or(|(_, b)| m.map > b) {
            best = Some((epoch, m.map));
            best_model = model.clone();
        }
        metrics.push(m);
        train_loss.push(mean_loss);
    }
    if let Some(d) = &divergence {
        log::warn!("{} seed {seed} diverged at {d}", cfg.variant);
    }
    Ok(RunResult {
        seed,
        schedule,
        metrics,
        train_loss,
        initial_params,
        final_model: model,
        best_model,
        best_epoch: best.map_or(0, |(e, _)| e),
        doc_encoder,
        divergence,
    })
}

/// Trains the base model that serves as `glob_e`'s frozen document encoder.
pub fn train_doc_encoder(train: &As2Corpus, dev: &As2Corpus, cfg: &TrainConfig) -> Result<DocEncoder> {
    let vocab = corpus_vocab(&[train], cfg)?;
    train_doc_encoder_with(train, dev, cfg, vocab)
}

fn train_doc_encoder_with(
    train: &As2Corpus,
    dev: &As2Corpus,
    cfg: &TrainConfig,
    vocab: Vocabulary,
) -> Result<DocEncoder> {
    let base_cfg = TrainConfig {
        variant: Variant::Base,
        epochs: cfg.doc_encoder_epochs.unwrap_or(cfg.epochs),
        total_steps: None,
        warmup_steps: None,
        ..cfg.clone()
    };
    let model = Model::new(base_cfg.model_config(vocab.len(), cfg.seed), vocab)?;
    let run = fit(model, train, dev, &base_cfg, cfg.seed, None)?;
    if let Some(d) = run.divergence {
        return Err(Error::Divergence(format!("document encoder training: {d}")));
    }
    DocEncoder::new(run.final_model)
}

fn resolve_doc_encoder(
    train: &As2Corpus,
    dev: &As2Corpus,
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    given: Option<DocEncoder>,
) -> Result<Option<DocEncoder>> {
    if cfg.variant != Variant::GlobE {
        return Ok(None);
    }
    match given {
        Some(e) => Ok(Some(e)),
        None => train_doc_encoder_with(train, dev, cfg, vocab.clone()).map(Some),
    }
}

/// One training run with seed `cfg.seed`.
pub fn train_run(train: &As2Corpus, dev: &As2Corpus, cfg: &TrainConfig) -> Result<RunResult> {
    train_run_with(train, dev, cfg, None)
}

/// Like [`train_run`], with an explicit document encoder for `glob_e`
/// (one is trained first when absent).
pub fn train_run_with(
    train: &As2Corpus,
    dev: &As2Corpus,
    cfg: &TrainConfig,
    doc_encoder: Option<DocEncoder>,
) -> Result<RunResult> {
    cfg.validate()?;
    let vocab = corpus_vocab(&[train], cfg)?;
    let enc = resolve_doc_encoder(train, dev, cfg, &vocab, doc_encoder)?;
    let model = Model::new(cfg.model_config(vocab.len(), cfg.seed), vocab)?;
    fit(model, train, dev, cfg, cfg.seed, enc)
}

/// `cfg.runs` runs with seeds `seed, seed+1, ...` and their per-epoch
/// mean/std. Stops after the first diverging run.
#[derive(Clone, Debug)]
pub struct MultiRun {
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<EpochMetrics>,
}

impl MultiRun {
    pub fn diverged(&self) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.divergence.is_some())
    }
}

pub fn train_runs(
    train: &As2Corpus,
    dev: &As2Corpus,
    cfg: &TrainConfig,
    doc_encoder: Option<DocEncoder>,
) -> Result<MultiRun> {
    cfg.validate()?;
    let vocab = corpus_vocab(&[train], cfg)?;
    let enc = resolve_doc_encoder(train, dev, cfg, &vocab, doc_encoder)?;
    let mut runs = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let model = Model::new(cfg.model_config(vocab.len(), seed), vocab.clone())?;
        let run = fit(model, train, dev, cfg, seed, enc.clone())?;
        let stop = run.divergence.is_some();
        runs.push(run);
        if stop {
            break;
        }
    }
    let complete: Vec<Vec<EpochMetrics>> = runs
        .iter()
        .filter(|r| r.divergence.is_none())
        .map(|r| r.metrics.clone())
        .collect();
    let aggregate = if complete.is_empty() { Vec::new() } else { aggregate_runs(&complete)? };
    Ok(MultiRun { runs, aggregate })
}

/// One stage of sequential fine-tuning.
#[derive(Clone, Copy, Debug)]
pub struct Stage<'c> {
    pub train: &'c As2Corpus,
    pub dev: &'c As2Corpus,
    pub config: &'c TrainConfig,
}

/// Fine-tunes on each stage in turn. Every stage starts from the previous
/// stage's final parameters with a fresh optimizer and schedule; the
/// vocabulary covers all training corpora.
pub fn transfer_train(stages: &[Stage<'_>], doc_encoder: Option<DocEncoder>) -> Result<Vec<RunResult>> {
    let first = stages.first().ok_or_else(|| Error::Config("no training stages".into()))?;
    for s in stages {
        s.config.validate()?;
        if s.config.variant != first.config.variant {
            return Err(Error::Config(format!(
                "variant changes from {} to {} between stages",
                first.config.variant, s.config.variant
            )));
        }
        if !s.config.same_architecture(first.config) {
            return Err(Error::Config("model architecture changes between stages".into()));
        }
    }
    let corpora: Vec<&As2Corpus> = stages.iter().map(|s| s.train).collect();
    let vocab = corpus_vocab(&corpora, first.config)?;
    let enc = resolve_doc_encoder(first.train, first.dev, first.config, &vocab, doc_encoder)?;
    let mut model = Model::new(first.config.model_config(vocab.len(), first.config.seed), vocab)?;
    let mut out: Vec<RunResult> = Vec::with_capacity(stages.len());
    for (i, s) in stages.iter().enumerate() {
        let run = fit(model, s.train, s.dev, s.config, s.config.seed, enc.clone())?;
        model = run.final_model.clone();
        let stop = run.divergence.is_some();
        out.push(run);
        if stop {
            log::warn!("transfer stopped at stage {}", i + 1);
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::{cand, doc};
    use crate::data::QuestionGroup;
    use std::collections::BTreeMap;

    /// Positives say "good", negatives say "bad": separable from the answer alone.
    fn keyword_corpus(n: usize, offset: usize) -> As2Corpus {
        let words = ["red", "blue", "green", "gold", "pink", "gray"];
        let mut documents = BTreeMap::new();
        let mut groups = Vec::new();
        for q in 0..n {
            let w = words[(q + offset) % words.len()];
            let o = words[(q + offset + 1) % words.len()];
            let d = doc(&format!("d{q}"), &[&format!("the {o} one is bad ."), &format!("the {w} one is good .")]);
            groups.push(QuestionGroup {
                question_id: format!("q{q}"),
                question: format!("which is {w} ?"),
                candidates: vec![cand(&d, 0, 0), cand(&d, 1, 1)],
            });
            documents.insert(d.doc_id.clone(), d);
        }
        As2Corpus { groups, documents }
    }

    fn small_cfg(variant: Variant) -> TrainConfig {
        TrainConfig {
            variant,
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
            max_len: 16,
            init_std: 0.1,
            lr_peak: 1e-2,
            batch_size: 4,
            epochs: 5,
            runs: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::default();
        assert_eq!((c.lr_peak, c.batch_size, c.runs), (3e-4, 64, 4));
        let s = c.schedule(640).unwrap();
        assert_eq!((s.total, s.warmup), (200, 20));
        assert!(TrainConfig { batch_size: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { runs: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { warmup_steps: Some(5), total_steps: Some(4), ..c.clone() }
            .validate()
            .is_err());
        let r = c.resolved(640).unwrap();
        assert_eq!((r.warmup_steps, r.total_steps, r.doc_encoder_epochs), (Some(20), Some(200), Some(20)));
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), r);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn separable_pairs_lose_loss_every_epoch() {
        let train = keyword_corpus(24, 0);
        let cfg = TrainConfig { warmup_steps: Some(0), ..small_cfg(Variant::Base) };
        let run = train_run(&train, &train, &cfg).unwrap();
        assert_eq!(run.train_loss.len(), 5);
        for w in run.train_loss.windows(2) {
            assert!(w[1] < w[0], "{:?}", run.train_loss);
        }
    }

    #[test]
    fn equal_seeds_give_identical_runs() {
        let train = keyword_corpus(8, 0);
        let cfg = TrainConfig { epochs: 2, ..small_cfg(Variant::LocT) };
        let a = train_run(&train, &train, &cfg).unwrap();
        let b = train_run(&train, &train, &cfg).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.final_model.params(), b.final_model.params());
    }

    #[test]
    fn multi_run_aggregates_per_epoch() {
        let train = keyword_corpus(8, 0);
        let cfg = TrainConfig { epochs: 2, ..small_cfg(Variant::Base) };
        let multi = train_runs(&train, &train, &cfg, None).unwrap();
        assert_eq!(multi.runs.len(), 2);
        assert_eq!(multi.runs[1].seed, cfg.seed + 1);
        let want = aggregate_runs(&[multi.runs[0].metrics.clone(), multi.runs[1].metrics.clone()]).unwrap();
        assert_eq!(multi.aggregate, want);
    }

    #[test]
    fn best_checkpoint_tracks_dev_map() {
        let train = keyword_corpus(8, 0);
        let run = train_run(&train, &train, &TrainConfig { epochs: 3, ..small_cfg(Variant::Base) }).unwrap();
        let best = run.metrics.iter().map(|m| m.map).fold(f64::MIN, f64::max);
        assert_eq!(run.metrics[run.best_epoch - 1].map, best);
        assert_eq!(run.best_checkpoint().meta.epoch, Some(run.best_epoch));
        assert_eq!(run.final_checkpoint().meta.epoch, Some(3));
    }

    #[test]
    fn huge_learning_rate_diverges_without_losing_the_model() {
        let train = keyword_corpus(8, 0);
        let cfg = TrainConfig { lr_peak: 1e300, warmup_steps: Some(0), epochs: 3, ..small_cfg(Variant::Base) };
        let run = train_run(&train, &train, &cfg).unwrap();
        assert!(run.divergence.is_some());
        assert!(run.final_model.params().iter().all(|(_, _, t)| t.is_finite()));
    }

    #[test]
    fn single_stage_transfer_equals_train_run() {
        let a = keyword_corpus(8, 0);
        let cfg = TrainConfig { epochs: 2, ..small_cfg(Variant::Base) };
        let direct = train_run(&a, &a, &cfg).unwrap();
        let staged = transfer_train(&[Stage { train: &a, dev: &a, config: &cfg }], None).unwrap();
        assert_eq!(staged.len(), 1);
        assert_eq!(staged[0].metrics, direct.metrics);
        assert_eq!(staged[0].final_model.params(), direct.final_model.params());
    }

    #[test]
    fn stages_hand_off_parameters_bitwise() {
        let a = keyword_corpus(8, 0);
        let b = keyword_corpus(6, 3);
        let cfg = TrainConfig { epochs: 1, ..small_cfg(Variant::Base) };
        let stages = [Stage { train: &a, dev: &a, config: &cfg }, Stage { train: &b, dev: &b, config: &cfg }];
        let runs = transfer_train(&stages, None).unwrap();
        assert_eq!(&runs[1].initial_params, runs[0].final_model.params());
        assert_eq!(runs[1].schedule, cfg.schedule(b.pairs()).unwrap());
    }

    #[test]
    fn variant_change_between_stages_is_rejected() {
        let a = keyword_corpus(4, 0);
        let c1 = small_cfg(Variant::Base);
        let c2 = small_cfg(Variant::LocT);
        let stages = [Stage { train: &a, dev: &a, config: &c1 }, Stage { train: &a, dev: &a, config: &c2 }];
        assert!(matches!(transfer_train(&stages, None), Err(Error::Config(_))));
        assert!(matches!(transfer_train(&[], None), Err(Error::Config(_))));
    }

    #[test]
    fn glob_e_trains_its_own_encoder() {
        let a = keyword_corpus(4, 0);
        let cfg = TrainConfig { epochs: 1, doc_encoder_epochs: Some(1), ..small_cfg(Variant::GlobE) };
        let run = train_run(&a, &a, &cfg).unwrap();
        assert!(run.doc_encoder.is_some());
        let (m, enc) = run.final_checkpoint().to_model().unwrap();
        assert_eq!(m.params(), run.final_model.params());
        assert!(enc.is_some());
    }
}
