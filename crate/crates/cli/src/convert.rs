use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, ValueEnum};
use ctxrank::data::{
    convert_squad, corpus_stats, filter_clean, load_corpus, read_asnq_tsv, read_wikiqa_tsv, save_corpus,
    wikiqa_train_sanity, As2Corpus, DocumentUnit, SquadOptions,
};
use ctxrank::synth;

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true)))]
pub struct ConvertArgs {
    /// SQuAD 1.1 JSON file.
    #[arg(long, group = "input")]
    squad: Option<PathBuf>,
    /// WikiQA TSV file.
    #[arg(long, group = "input")]
    wikiqa: Option<PathBuf>,
    /// WikiQA TSV file, keeping only questions with both a positive and a negative.
    #[arg(long, group = "input")]
    wikiqa_clean: Option<PathBuf>,
    /// ASNQ TSV file.
    #[arg(long, group = "input")]
    asnq: Option<PathBuf>,
    /// An existing JSONL corpus (e.g. to apply --clean).
    #[arg(long, group = "input")]
    jsonl: Option<PathBuf>,
    /// Keep only questions with at least one positive and one negative.
    #[arg(long)]
    clean: bool,
    /// SQuAD: one document per paragraph instead of per article.
    #[arg(long)]
    paragraph_docs: bool,
    /// Output JSONL path; documents go to the `.docs.jsonl` sidecar.
    #[arg(long)]
    out: PathBuf,
}

fn is_blank(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.trim().is_empty())
}

pub fn run(args: &ConvertArgs) -> Result<()> {
    let mut clean = args.clean;
    let mut wikiqa = false;
    let corpus = if let Some(p) = &args.squad {
        if is_blank(p)? {
            As2Corpus::default()
        } else {
            let unit = if args.paragraph_docs { DocumentUnit::Paragraph } else { DocumentUnit::Article };
            convert_squad(p, SquadOptions { document_unit: unit })?.corpus
        }
    } else if let Some(p) = args.wikiqa.as_ref().or(args.wikiqa_clean.as_ref()) {
        wikiqa = true;
        clean |= args.wikiqa_clean.is_some();
        if is_blank(p)? { As2Corpus::default() } else { read_wikiqa_tsv(p)? }
    } else if let Some(p) = &args.asnq {
        if is_blank(p)? { As2Corpus::default() } else { read_asnq_tsv(p)? }
    } else if let Some(p) = &args.jsonl {
        load_corpus(p)?
    } else {
        unreachable!("clap requires one input")
    };

    if wikiqa {
        for w in wikiqa_train_sanity(&corpus_stats(&corpus)) {
            log::warn!("{w}");
        }
    }
    let corpus = if clean { filter_clean(&corpus) } else { corpus };
    save_corpus(&corpus, &args.out)?;
    let s = corpus_stats(&corpus);
    println!(
        "questions {}  pairs {}  positives {}  positives/question {:.3}  candidates/question {:.3}  documents {}  without positive {}",
        s.questions,
        s.pairs,
        s.positives,
        s.positives_per_question,
        s.candidates_per_question,
        s.documents,
        s.without_positive
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Task {
    Local,
    Global,
    Mixed,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long, default_value_t = 500)]
    questions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let corpus = match args.task {
        Task::Local => synth::local_task(args.questions, args.seed),
        Task::Global => synth::global_task(args.questions, args.seed),
        Task::Mixed => synth::mixed_task(args.questions, args.seed),
    };
    save_corpus(&corpus, &args.out)?;
    println!("wrote {} questions to {}", corpus.groups.len(), args.out.display());
    Ok(())
}
