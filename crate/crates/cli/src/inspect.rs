use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use ctxrank::data::{load_corpus, As2Corpus};
use ctxrank::eval::{evaluate, read_metrics_csv, write_question_tsv, EpochMetrics};
use ctxrank::model::{Aux, Checkpoint, Model};

use crate::{Exit, ScoringArgs};

fn load(args: &ScoringArgs) -> Result<(Model, As2Corpus, Aux)> {
    let ck = match args.variant {
        Some(v) => Checkpoint::load_variant(&args.checkpoint, v)?,
        None => Checkpoint::load(&args.checkpoint)?,
    };
    let (model, doc_encoder) = ck.to_model()?;
    let corpus = load_corpus(&args.corpus)?;
    let aux = model.build_aux(&corpus.documents, doc_encoder.as_ref())?;
    Ok((model, corpus, aux))
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Per-question TSV (question_id, rank_of_first_positive, ap); defaults
    /// to `<checkpoint>.questions.tsv`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (model, corpus, aux) = load(&args.scoring)?;
    let ev = evaluate(&model, &corpus, &aux)?;
    let m = &ev.metrics;
    println!(
        "variant {}  MAP {:.4}  P@1 {:.4}  questions {}  excluded {}",
        model.variant(),
        m.map,
        m.p1,
        m.n_questions,
        m.excluded
    );
    let out = args
        .diagnostics
        .clone()
        .unwrap_or_else(|| args.scoring.checkpoint.with_extension("questions.tsv"));
    write_question_tsv(&out, &ev.questions)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Show the full ranking of this question; without it, print the
    /// selected answer of every question.
    #[arg(long)]
    question_id: Option<String>,
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let (model, corpus, aux) = load(&args.scoring)?;
    match &args.question_id {
        Some(id) => {
            let g = corpus
                .group(id)
                .ok_or_else(|| Exit::compatibility(format!("question {id} is not in {}", args.scoring.corpus.display())))?;
            let r = model.rank(g, &aux)?;
            println!("question {}: {}", g.question_id, g.question);
            println!("rank  cand  sent  label  logit      sentence");
            for (k, &i) in r.order.iter().enumerate() {
                let c = &g.candidates[i];
                println!(
                    "{:<5} {:<5} {:<5} {:<6} {:<+10.5} {}",
                    k + 1,
                    i,
                    c.sent_index,
                    c.label,
                    r.logits[i],
                    c.sentence
                );
            }
            let sel = &g.candidates[r.selected()];
            println!("selected: candidate {} (sentence {}): {}", r.selected(), sel.sent_index, sel.sentence);
        }
        None => {
            for g in &corpus.groups {
                let r = model.rank(g, &aux)?;
                let sel = &g.candidates[r.selected()];
                println!("{}\t{}\t{}\t{}", g.question_id, r.selected(), sel.label, sel.sentence);
            }
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Training output directory (reads aggregate.csv and run*.csv).
    #[arg(long, required_unless_present = "csv")]
    dir: Option<PathBuf>,
    /// Metric CSV files to summarize instead of a directory.
    #[arg(long, num_args = 1..)]
    csv: Vec<PathBuf>,
}

fn print_table(name: &str, metrics: &[EpochMetrics]) {
    println!("{name}");
    println!("  epo  map     ±std    p@1     ±std");
    for m in metrics {
        println!("  {:<4} {:.4}  {:.4}  {:.4}  {:.4}", m.epoch, m.map, m.map_std, m.p1, m.p1_std);
    }
    if let Some(best) = metrics.iter().fold(None::<&EpochMetrics>, |b, m| match b {
        Some(b) if b.map >= m.map => Some(b),
        _ => Some(m),
    }) {
        println!("  best MAP {:.4} (p@1 {:.4}) at epoch {}", best.map, best.p1, best.epoch);
    }
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut files = args.csv.clone();
    if let Some(dir) = &args.dir {
        let mut runs: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run") && n.ends_with(".csv"))
            })
            .collect();
        runs.sort();
        files.extend(runs);
        let agg = dir.join("aggregate.csv");
        if agg.exists() {
            files.push(agg);
        }
    }
    if files.is_empty() {
        bail!("no metric CSVs found");
    }
    for f in &files {
        print_table(&f.display().to_string(), &read_metrics_csv(f)?);
    }
    Ok(())
}
