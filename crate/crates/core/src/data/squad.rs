//! SQuAD 1.1 → AS2: every sentence of the question's paragraph becomes a
//! candidate, labeled positive iff an annotated answer span overlaps it.

use std::path::Path;

use serde_json::Value;

use super::{attach_context, split_sentences, As2Corpus, Candidate, Document, QuestionGroup};
use crate::error::{Error, Result};

/// What a `Document` corresponds to in the SQuAD hierarchy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DocumentUnit {
    /// All paragraphs of an article, in order.
    #[default]
    Article,
    /// Each paragraph on its own.
    Paragraph,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SquadOptions {
    pub document_unit: DocumentUnit,
}

/// Converted corpus plus the per-record warnings raised on the way.
#[derive(Clone, Debug, Default)]
pub struct Conversion {
    pub corpus: As2Corpus,
    pub warnings: Vec<String>,
}

pub fn convert_squad(path: &Path, opts: SquadOptions) -> Result<Conversion> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    convert_squad_str(&text, opts).map_err(|e| match e {
        Error::Parse { location, message } => Error::parse(
            format!("{}: {location}", path.display()),
            message,
        ),
        other => other,
    })
}

pub fn convert_squad_str(json: &str, opts: SquadOptions) -> Result<Conversion> {
    let root: Value = serde_json::from_str(json).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    let mut out = Conversion::default();
    let articles = array(&root, "data", "$")?;
    for (ai, article) in articles.iter().enumerate() {
        let apath = format!("$.data[{ai}]");
        let title = article.get("title").and_then(Value::as_str).map(str::to_string);
        let paragraphs = array(article, "paragraphs", &apath)?;
        let article_id = format!("a{ai}");

        let mut article_sentences: Vec<String> = Vec::new();
        for (pi, para) in paragraphs.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{pi}]");
            let context = string(para, "context", &ppath)?;
            let spans = split_sentences(context);
            let context_len = context.chars().count();

            let (doc_id, offset) = match opts.document_unit {
                DocumentUnit::Article => (article_id.clone(), article_sentences.len()),
                DocumentUnit::Paragraph => (format!("{article_id}p{pi}"), 0),
            };
            let sentences: Vec<String> = spans.iter().map(|s| s.text.clone()).collect();

            for (qi, qa) in array(para, "qas", &ppath)?.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{qi}]");
                let question = string(qa, "question", &qpath)?;
                let qid = match qa.get("id") {
                    Some(Value::String(s)) => s.clone(),
                    Some(Value::Number(n)) => n.to_string(),
                    _ => format!("{article_id}p{pi}q{qi}"),
                };
                let mut labels = vec![0u8; spans.len()];
                let answers = match qa.get("answers") {
                    None | Some(Value::Null) => Vec::new(),
                    Some(Value::Array(a)) => a.clone(),
                    Some(_) => {
                        return Err(Error::parse(format!("{qpath}.answers"), "expected an array"))
                    }
                };
                if answers.is_empty() {
                    out.warnings.push(format!("question {qid}: no annotated answers"));
                }
                for (ni, ans) in answers.iter().enumerate() {
                    let npath = format!("{qpath}.answers[{ni}]");
                    let start = ans
                        .get("answer_start")
                        .and_then(Value::as_i64)
                        .ok_or_else(|| Error::parse(format!("{npath}.answer_start"), "expected an integer"))?;
                    let len = string(ans, "text", &npath)?.chars().count() as i64;
                    let end = start + len;
                    if start < 0 || len == 0 || end > context_len as i64 {
                        out.warnings.push(format!(
                            "question {qid}: answer span [{start}, {end}) outside paragraph of {context_len} chars; ignored"
                        ));
                        continue;
                    }
                    let (start, end) = (start as usize, end as usize);
                    for (si, sp) in spans.iter().enumerate() {
                        if start < sp.end && sp.start < end {
                            labels[si] = 1;
                        }
                    }
                }
                if spans.is_empty() {
                    out.warnings.push(format!("question {qid}: empty paragraph; dropped"));
                    continue;
                }
                let candidates = sentences
                    .iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(si, (s, &label))| Candidate {
                        sentence: s.clone(),
                        prev: None,
                        next: None,
                        doc_id: doc_id.clone(),
                        sent_index: offset + si,
                        label,
                    })
                    .collect();
                out.corpus.groups.push(QuestionGroup {
                    question_id: qid,
                    question: question.to_string(),
                    candidates,
                });
            }

            match opts.document_unit {
                DocumentUnit::Article => article_sentences.extend(sentences),
                DocumentUnit::Paragraph if !sentences.is_empty() => {
                    out.corpus.documents.insert(
                        doc_id.clone(),
                        Document { doc_id, title: title.clone(), sentences },
                    );
                }
                DocumentUnit::Paragraph => {}
            }
        }
        if opts.document_unit == DocumentUnit::Article && !article_sentences.is_empty() {
            out.corpus.documents.insert(
                article_id.clone(),
                Document { doc_id: article_id, title, sentences: article_sentences },
            );
        }
    }
    for w in &out.warnings {
        log::warn!("{w}");
    }
    out.corpus = attach_context(&out.corpus)?;
    Ok(out)
}

fn array<'v>(v: &'v Value, key: &str, path: &str) -> Result<&'v Vec<Value>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(format!("{path}.{key}"), "expected an array"))
}

fn string<'v>(v: &'v Value, key: &str, path: &str) -> Result<&'v str> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse(format!("{path}.{key}"), "expected a string"))
}
