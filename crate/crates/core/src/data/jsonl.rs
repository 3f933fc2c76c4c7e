//! Line-oriented corpus files.
//!
//! `corpus.jsonl` holds one candidate per line:
//! `{question_id, question, doc_id, sent_index, sentence, prev, next, label}`;
//! `corpus.docs.jsonl` holds one `{doc_id, title, sentences}` object per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{As2Corpus, Candidate, Document, QuestionGroup};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    question_id: String,
    question: String,
    doc_id: String,
    sent_index: usize,
    sentence: String,
    prev: Option<String>,
    next: Option<String>,
    label: u8,
}

/// `corpus.jsonl` → `corpus.docs.jsonl`
pub fn docs_sidecar_path(path: &Path) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("corpus");
    let stem = name.strip_suffix(".jsonl").unwrap_or(name);
    path.with_file_name(format!("{stem}.docs.jsonl"))
}

pub fn save_corpus(corpus: &As2Corpus, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for g in &corpus.groups {
        for c in &g.candidates {
            let rec = PairRecord {
                question_id: g.question_id.clone(),
                question: g.question.clone(),
                doc_id: c.doc_id.clone(),
                sent_index: c.sent_index,
                sentence: c.sentence.clone(),
                prev: c.prev.clone(),
                next: c.next.clone(),
                label: c.label,
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = docs_sidecar_path(path);
    let mut w = BufWriter::new(File::create(&side).map_err(|e| Error::io(&side, e))?);
    for d in corpus.documents.values() {
        let line = serde_json::to_string(d).expect("document serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(&side, e))?;
    }
    w.flush().map_err(|e| Error::io(&side, e))
}

/// Loads a corpus and its document sidecar. Without a sidecar, documents are
/// rebuilt from the candidates, which must then cover every sentence index.
pub fn load_corpus(path: &Path) -> Result<As2Corpus> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut corpus = As2Corpus::default();
    let mut group_index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), n + 1);
        let rec: PairRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(at(), e.to_string()))?;
        if rec.label > 1 {
            return Err(Error::parse(at(), format!("label must be 0 or 1, got {}", rec.label)));
        }
        if rec.question.trim().is_empty() {
            return Err(Error::parse(at(), "empty question"));
        }
        let cand = Candidate {
            sentence: rec.sentence,
            prev: rec.prev,
            next: rec.next,
            doc_id: rec.doc_id,
            sent_index: rec.sent_index,
            label: rec.label,
        };
        match group_index.get(&rec.question_id) {
            Some(&gi) => {
                if corpus.groups[gi].question != rec.question {
                    return Err(Error::parse(at(), format!(
                        "question text differs from earlier lines of {}",
                        rec.question_id
                    )));
                }
                corpus.groups[gi].candidates.push(cand)
            }
            None => {
                group_index.insert(rec.question_id.clone(), corpus.groups.len());
                corpus.groups.push(QuestionGroup {
                    question_id: rec.question_id,
                    question: rec.question,
                    candidates: vec![cand],
                });
            }
        }
    }

    let side = docs_sidecar_path(path);
    if side.exists() {
        let reader = BufReader::new(File::open(&side).map_err(|e| Error::io(&side, e))?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&side, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line)
                .map_err(|e| Error::parse(format!("{}:{}", side.display(), n + 1), e.to_string()))?;
            corpus.documents.insert(doc.doc_id.clone(), doc);
        }
    } else {
        corpus.documents = rebuild_documents(&corpus)?;
    }
    corpus.validate()?;
    Ok(corpus)
}

fn rebuild_documents(corpus: &As2Corpus) -> Result<BTreeMap<String, Document>> {
    let mut slots: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
    for g in &corpus.groups {
        for c in &g.candidates {
            slots
                .entry(c.doc_id.clone())
                .or_default()
                .insert(c.sent_index, c.sentence.clone());
        }
    }
    let mut docs = BTreeMap::new();
    for (id, sents) in slots {
        if sents.keys().copied().ne(0..sents.len()) {
            return Err(Error::Integrity(format!(
                "no document sidecar and candidates of {id} do not cover every sentence"
            )));
        }
        docs.insert(
            id.clone(),
            Document { doc_id: id, title: None, sentences: sents.into_values().collect() },
        );
    }
    Ok(docs)
}
