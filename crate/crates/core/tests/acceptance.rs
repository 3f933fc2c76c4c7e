//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use ctxrank::data::{
    convert_squad_str, corpus_stats, filter_clean, read_wikiqa_tsv, wikiqa_train_sanity, As2Corpus, SquadOptions,
};
use ctxrank::encode::{make_projection, project_bow};
use ctxrank::eval::{aggregate_runs, average_precision, evaluate_logits, p_at_1, read_metrics_csv, write_metrics_csv, MetricAccumulator};
use ctxrank::model::{rank_by_logits, Aux, GlobalFeatures, Variant};
use ctxrank::synth;
use ctxrank::train::{train_run, train_runs, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let corpus = tiny_corpus();
    let mut worst: Vec<String> = Vec::new();
    let mut fail = Vec::new();
    for v in [Variant::Base, Variant::LocT, Variant::LocE, Variant::GlobB, Variant::GlobE, Variant::Dual] {
        let (model, aux) = tiny_model(v, &corpus);
        let longest = corpus
            .groups
            .iter()
            .flat_map(|g| g.candidates.iter().map(move |c| (g, c)))
            .flat_map(|(g, c)| model.sequences(&g.question, c).unwrap())
            .map(|s| s.len())
            .max()
            .unwrap_or(0);
        ensure(longest <= 16, format!("{v}: sequence of length {longest}"))?;
        let err = model_gradient_error(&model, &corpus, &aux);
        worst.push(format!("{v} {err:.1e}"));
        if err >= TOLERANCE {
            fail.push(v.to_string());
        }
    }
    let t = start.elapsed();
    ensure(fail.is_empty(), format!("relative error >= 1e-4 for {fail:?}: {}", worst.join(", ")))?;
    ensure(t < Duration::from_secs(60), format!("took {t:.1?}"))?;
    Ok(format!("max rel. error per variant: {}; {t:.1?}", worst.join(", ")))
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut corpus = As2Corpus::default();
    let mut all_logits = Vec::new();
    let mut acc = MetricAccumulator::default();
    let d = doc("d", &["x ."]);
    corpus.documents.insert("d".into(), d.clone());
    for q in 0..1000 {
        let n = rng.random_range(1..=6);
        let logits: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..4u8)) * 0.5).collect();
        let sent: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let order = rank_by_logits(&logits, &sent);
        ensure(order == brute_force_order(&logits, &sent), format!("order differs on group {q}"))?;
        let ranked: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
        match (average_precision(&ranked), brute_force_ap(&ranked)) {
            (Some(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                ensure(p_at_1(&ranked).unwrap() == ranked[0], "P@1 disagrees")?;
            }
            (None, None) => {}
            other => return Err(format!("exclusion disagrees on group {q}: {other:?}")),
        }
        let mut g = ctxrank::data::QuestionGroup { question_id: format!("q{q}"), question: "q".into(), candidates: vec![] };
        for (&l, &s) in labels.iter().zip(&sent) {
            let mut c = cand(&d, 0, l);
            c.sent_index = s;
            g.candidates.push(c);
        }
        acc.push(&g.question_id, &ranked).unwrap();
        corpus.groups.push(g);
        all_logits.push(logits);
    }
    let pipeline = evaluate_logits(&corpus, &all_logits).map_err(|e| e.to_string())?.metrics;
    let direct = acc.finish(0).metrics;
    ensure((pipeline.map - direct.map).abs() <= 1e-12, "pipeline MAP differs")?;
    ensure(worst <= 1e-12, format!("AP deviates by {worst:e}"))?;

    let ap = average_precision(&[0, 1, 1]).unwrap();
    ensure((ap - 7.0 / 12.0).abs() <= 1e-15, format!("AP([0,1,1]) = {ap}"))?;
    let mut two = MetricAccumulator::default();
    two.push("a", &[1, 0, 0]).unwrap();
    two.push("b", &[0, 1, 1]).unwrap();
    let map = two.finish(0).metrics.map;
    ensure((map - 19.0 / 24.0).abs() <= 1e-15, format!("MAP = {map}"))?;
    Ok(format!(
        "1000 groups, max AP deviation {worst:.1e}; AP([0,1,1]) = {ap} (7/12 {:+.0e}); MAP = {map} (19/24 {:+.0e})",
        ap - 7.0 / 12.0,
        map - 19.0 / 24.0
    ))
}

/// Shared desk-scale setting for the synthetic tasks.
fn synth_cfg(variant: Variant) -> TrainConfig {
    TrainConfig {
        variant,
        d_model: 64,
        n_layers: 1,
        n_heads: 4,
        d_ff: 128,
        max_len: 32,
        init_std: 0.1,
        lr_peak: 1e-3,
        batch_size: 32,
        epochs: 20,
        runs: 1,
        ..TrainConfig::default()
    }
}

fn final_p1(train: &As2Corpus, dev: &As2Corpus, variant: Variant) -> Result<f64, String> {
    let run = train_run(train, dev, &synth_cfg(variant)).map_err(|e| e.to_string())?;
    if let Some(d) = run.divergence {
        return Err(format!("{variant} diverged: {d}"));
    }
    Ok(run.metrics.last().map_or(0.0, |m| m.p1))
}

fn local_context() -> Outcome {
    let start = Instant::now();
    let (train, dev) = (synth::local_task(500, 1), synth::local_task(200, 2));
    let loc_t = final_p1(&train, &dev, Variant::LocT)?;
    let base = final_p1(&train, &dev, Variant::Base)?;
    let t = start.elapsed();
    let summary = format!("dev P@1 after 20 epochs: loc_t {loc_t:.3}, base {base:.3}; {t:.0?}");
    ensure(loc_t >= 0.90 && base <= 0.35 && t < Duration::from_secs(600), summary.clone())?;
    Ok(summary)
}

fn global_context() -> Outcome {
    let start = Instant::now();
    let (train, dev) = (synth::global_task(500, 3), synth::global_task(200, 4));
    let glob_b = final_p1(&train, &dev, Variant::GlobB)?;
    let base = final_p1(&train, &dev, Variant::Base)?;
    let (mtrain, mdev) = (synth::mixed_task(500, 5), synth::mixed_task(200, 6));
    let m_loc = final_p1(&mtrain, &mdev, Variant::LocT)?;
    let m_glob = final_p1(&mtrain, &mdev, Variant::GlobB)?;
    let m_dual = final_p1(&mtrain, &mdev, Variant::Dual)?;
    let t = start.elapsed();
    let summary = format!(
        "global task: glob_b {glob_b:.3}, base {base:.3}; mixed task: dual {m_dual:.3}, loc_t {m_loc:.3}, glob_b {m_glob:.3}; {t:.0?}"
    );
    ensure(glob_b >= 0.90 && base <= 0.35 && m_dual >= m_loc.max(m_glob), summary.clone())?;
    Ok(summary)
}

fn converters() -> Outcome {
    let p0 = "Marie Curie was a physicist. She won two Nobel prizes. She was born in Warsaw.";
    let p1 = "The prizes came in 1903 and 1911. Her daughter also won one.";
    let p2 = "Paris is large. It is the capital of France. Many tourists visit.";
    let ans = |ctx: &str, text: &str| json!({"answer_start": ctx.find(text).unwrap(), "text": text});
    let squad = json!({"data": [
        {"title": "Curie", "paragraphs": [
            {"context": p0, "qas": [
                {"id": "q1", "question": "Where was Curie born?", "answers": [ans(p0, "Warsaw")]},
                {"id": "q2", "question": "What did she win?", "answers": [ans(p0, "two Nobel prizes"), ans(p0, "Nobel prizes")]}
            ]},
            {"context": p1, "qas": [
                {"id": "q3", "question": "When did the prizes come?", "answers": [ans(p1, "1911. Her daughter")]}
            ]}
        ]},
        {"title": "Paris", "paragraphs": [
            {"context": p2, "qas": [
                {"id": "q4", "question": "What is Paris?", "answers": [ans(p2, "the capital of France")]},
                {"id": "q5", "question": "What about Paris?", "answers": [ans(p2, "Paris"), ans(p2, "Many tourists")]}
            ]}
        ]}
    ]});
    let conv = convert_squad_str(&squad.to_string(), SquadOptions::default()).map_err(|e| e.to_string())?;
    let got: Vec<Vec<u8>> = conv.corpus.groups.iter().map(|g| g.labels()).collect();
    let want = vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 1], vec![0, 1, 0], vec![1, 0, 1]];
    ensure(got == want, format!("SQuAD labels {got:?}, expected {want:?}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("wikiqa.tsv");
    let mut tsv = String::from("QuestionID\tQuestion\tDocumentID\tDocumentTitle\tSentenceID\tSentence\tLabel\n");
    for (q, labels) in [("Q1", [0, 1, 0]), ("Q2", [0, 0, 0]), ("Q3", [1, 1, 1]), ("Q4", [1, 0, 0])] {
        for (k, l) in labels.iter().enumerate() {
            tsv.push_str(&format!("{q}\t{q} asks?\tD{q}\tT\tD{q}-{k}\tSentence {k} of {q}.\t{l}\n"));
        }
    }
    std::fs::write(&path, tsv).map_err(|e| e.to_string())?;
    let corpus = read_wikiqa_tsv(&path).map_err(|e| e.to_string())?;
    let kept: Vec<String> = filter_clean(&corpus).groups.into_iter().map(|g| g.question_id).collect();
    ensure(kept == ["Q1", "Q4"], format!("clean filter kept {kept:?}"))?;
    Ok("SQuAD label matrix matches (incl. straddling span); clean filter keeps Q1, Q4".into())
}

fn protocol() -> Outcome {
    let train = synth::local_task(40, 7);
    let dev = synth::local_task(20, 8);
    let cfg = TrainConfig {
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        n_layers: 1,
        max_len: 32,
        init_std: 0.1,
        lr_peak: 1e-3,
        batch_size: 16,
        epochs: 3,
        runs: 4,
        variant: Variant::LocT,
        ..TrainConfig::default()
    };
    let write_all = |dir: &Path| -> Result<Vec<Vec<u8>>, String> {
        let multi = train_runs(&train, &dev, &cfg, None).map_err(|e| e.to_string())?;
        ensure(multi.runs.len() == 4, "expected 4 runs")?;
        let mut files = Vec::new();
        for (i, r) in multi.runs.iter().enumerate() {
            let p = dir.join(format!("run{i}.csv"));
            write_metrics_csv(&p, &r.metrics).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&p).map_err(|e| e.to_string())?);
        }
        let p = dir.join("aggregate.csv");
        write_metrics_csv(&p, &multi.aggregate).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&p).map_err(|e| e.to_string())?);

        // mean ± population std by hand, per epoch
        for (e, agg) in multi.aggregate.iter().enumerate() {
            let maps: Vec<f64> = multi.runs.iter().map(|r| r.metrics[e].map).collect();
            let mean = maps.iter().sum::<f64>() / 4.0;
            let std = (maps.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            ensure((agg.map - mean).abs() <= 1e-12 && (agg.map_std - std).abs() <= 1e-12, format!("epoch {} aggregate off", e + 1))?;
        }
        let back = read_metrics_csv(&p).map_err(|e| e.to_string())?;
        for (a, b) in back.iter().zip(&multi.aggregate) {
            ensure((a.map - b.map).abs() <= 1e-12 && (a.p1_std - b.p1_std).abs() <= 1e-12, "CSV read-back differs")?;
        }
        ensure(aggregate_runs(&multi.runs.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>()).ok() == Some(multi.aggregate.clone()), "aggregate mismatch")?;
        Ok(files)
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = write_all(a.path())?;
    let second = write_all(b.path())?;
    ensure(first == second, "CSVs differ between identical seeds")?;
    Ok("4 runs -> 4 run CSVs + mean/std aggregate per epoch; repeat run byte-identical".into())
}

fn normalization() -> Outcome {
    let r = make_projection(50, 16, 9).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let bow: BTreeMap<usize, f64> = (0..8).map(|_| (rng.random_range(0..50), f64::from(rng.random_range(1..5u8)))).collect();
        let base = project_bow(&bow, &r).map_err(|e| e.to_string())?;
        for c in [0.01, 0.5, 3.0, 1e4] {
            let scaled: BTreeMap<usize, f64> = bow.iter().map(|(&k, &v)| (k, v * c)).collect();
            let s = project_bow(&scaled, &r).map_err(|e| e.to_string())?;
            for (x, y) in base.data().iter().zip(s.data()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst <= 1e-12, format!("scaling changes projection by {worst:e}"))?;
    let zero = project_bow(&BTreeMap::new(), &r).map_err(|e| e.to_string())?;
    ensure(zero.data().iter().all(|&v| v == 0.0), "zero BOW does not map to zero")?;

    // with a zero feature, the BOW half of the head cannot move the logit
    let corpus = tiny_corpus();
    let (mut model, _) = tiny_model(Variant::GlobB, &corpus);
    let d = model.config().d_model;
    let mut feats = GlobalFeatures::default();
    for id in corpus.documents.keys() {
        feats.insert(id.clone(), project_bow(&BTreeMap::new(), &make_projection(model.vocab().len(), d, 1).unwrap()).unwrap());
    }
    let aux = Aux::with_global(feats);
    let g = &corpus.groups[0];
    let before: Vec<u64> = g.candidates.iter().map(|c| model.score(&g.question, c, &aux).unwrap().to_bits()).collect();
    let w = model.head_weight();
    for k in d..2 * d {
        model.params_mut().get_mut(w).data_mut()[k] = 1e3 * (k as f64 - 11.5);
    }
    let after: Vec<u64> = g.candidates.iter().map(|c| model.score(&g.question, c, &aux).unwrap().to_bits()).collect();
    ensure(before == after, "BOW half of the head changed the logit")?;
    Ok(format!("max deviation under scaling {worst:.1e}; zero BOW -> zero vector, contribution exactly 0"))
}

fn wikiqa_sanity() -> Result<Option<String>, String> {
    let Some(path) = std::env::var_os("CTXRANK_WIKIQA_TRAIN") else {
        return Ok(None);
    };
    let corpus = read_wikiqa_tsv(Path::new(&path)).map_err(|e| e.to_string())?;
    let stats = corpus_stats(&corpus);
    let warnings = wikiqa_train_sanity(&stats);
    Ok(Some(format!(
        "{} questions, {:.2} candidates/question{}",
        stats.questions,
        stats.candidates_per_question,
        if warnings.is_empty() { String::new() } else { format!("; warnings: {}", warnings.join("; ")) }
    )))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 gradient fidelity", gradient_fidelity),
        ("2 metric oracle", metric_oracle),
        ("3 local-context synthetic task", local_context),
        ("4 global-context and mixed synthetic tasks", global_context),
        ("5 converter correctness", converters),
        ("6 protocol fidelity", protocol),
        ("7 normalization invariance", normalization),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    match wikiqa_sanity() {
        Ok(Some(detail)) => println!("PASS  criterion 8 WikiQA sanity: {detail}"),
        Ok(None) => println!("SKIP  criterion 8 WikiQA sanity: set CTXRANK_WIKIQA_TRAIN to WikiQA-train.tsv to run"),
        Err(e) => {
            failed += 1;
            println!("FAIL  criterion 8 WikiQA sanity: {e}");
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
