use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ctxrank::data::As2Corpus;
use ctxrank::encode::{make_projection, project_bow};
use ctxrank::eval::{average_precision, evaluate_logits};
use ctxrank::model::{Model, ModelConfig, Variant};
use ctxrank::numerics::Tape;
use ctxrank::synth;
use ctxrank::text::build_vocab;

fn model_for(variant: Variant, corpus: &As2Corpus) -> Model {
    let texts = corpus
        .documents
        .values()
        .flat_map(|d| d.sentences.iter().map(String::as_str))
        .chain(corpus.groups.iter().map(|g| g.question.as_str()));
    let vocab = build_vocab(texts, 1000, 1).unwrap();
    let config = ModelConfig {
        d_model: 64,
        n_layers: 1,
        n_heads: 4,
        d_ff: 128,
        max_len: 32,
        ..ModelConfig::new(variant, vocab.len())
    };
    Model::new(config, vocab).unwrap()
}

fn encoder(c: &mut Criterion) {
    let corpus = synth::mixed_task(8, 0);
    let group = &corpus.groups[0];
    for variant in [Variant::Base, Variant::LocT, Variant::Dual] {
        let model = model_for(variant, &corpus);
        let aux = model.build_aux(&corpus.documents, None).unwrap();
        let inputs = model.prepare_group(group, &aux).unwrap();
        let labels: Vec<f64> = group.candidates.iter().map(|c| f64::from(c.label)).collect();
        c.bench_function(&format!("forward {variant}"), |b| {
            b.iter(|| inputs.iter().map(|x| model.logit(black_box(x)).unwrap()).sum::<f64>())
        });
        c.bench_function(&format!("forward+backward {variant}"), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let logits: Vec<_> = inputs.iter().map(|x| model.logit_on_tape(&mut tape, x).unwrap()).collect();
                let z = tape.concat(&logits).unwrap();
                let loss = tape.bce_with_logits(z, &labels).unwrap();
                tape.backward(loss).unwrap()
            })
        });
    }
}

fn projection(c: &mut Criterion) {
    let r = make_projection(5000, 64, 1).unwrap();
    let bow: BTreeMap<usize, f64> = (0..200).map(|i| (i * 23 % 5000, 1.0 + (i % 3) as f64)).collect();
    c.bench_function("project_bow 200 types", |b| b.iter(|| project_bow(black_box(&bow), &r).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 7 == 3)).collect();
    c.bench_function("average_precision 50", |b| b.iter(|| average_precision(black_box(&labels))));
    let corpus = synth::mixed_task(200, 0);
    let logits: Vec<Vec<f64>> = corpus
        .groups
        .iter()
        .map(|g| (0..g.candidates.len()).map(|i| ((i * 31 + 7) % 13) as f64).collect())
        .collect();
    c.bench_function("evaluate_logits 200 questions", |b| {
        b.iter(|| evaluate_logits(&corpus, black_box(&logits)).unwrap())
    });
}

criterion_group!(benches, encoder, projection, metrics);
criterion_main!(benches);
