//! Readers for the distributed WikiQA and ASNQ files.

use std::collections::BTreeMap;
use std::path::Path;

use super::{attach_context, As2Corpus, Candidate, CorpusStats, Document, QuestionGroup};
use crate::error::{Error, Result};

/// Training questions reported for WikiQA.
pub const WIKIQA_TRAIN_QUESTIONS: usize = 2118;
const WIKIQA_CANDIDATES_PER_QUESTION: f64 = 10.0;

/// Reads `WikiQA-*.tsv` (columns `QuestionID Question DocumentID DocumentTitle
/// SentenceID Sentence Label`). Documents are rebuilt from the `Dn-k`
/// sentence ids.
pub fn read_wikiqa_tsv(path: &Path) -> Result<As2Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let mut corpus = As2Corpus::default();
    let mut doc_sents: BTreeMap<String, (Option<String>, BTreeMap<usize, String>)> = BTreeMap::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let at = || format!("{}:{line}", path.display());
        let rec = rec.map_err(|e| Error::parse(at(), e.to_string()))?;
        if rec.len() != 7 {
            return Err(Error::parse(at(), format!("expected 7 columns, got {}", rec.len())));
        }
        let (qid, question, doc_id, title, sid, sentence, label) =
            (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4], &rec[5], &rec[6]);
        let sent_index: usize = sid
            .rsplit('-')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(at(), format!("bad SentenceID {sid:?}")))?;
        let label: u8 = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(at(), format!("bad label {other:?}"))),
        };
        let entry = doc_sents
            .entry(doc_id.to_string())
            .or_insert_with(|| (Some(title.to_string()), BTreeMap::new()));
        entry.1.insert(sent_index, sentence.to_string());

        let cand = Candidate {
            sentence: sentence.to_string(),
            prev: None,
            next: None,
            doc_id: doc_id.to_string(),
            sent_index,
            label,
        };
        match index.get(qid) {
            Some(&gi) => corpus.groups[gi].candidates.push(cand),
            None => {
                index.insert(qid.to_string(), corpus.groups.len());
                corpus.groups.push(QuestionGroup {
                    question_id: qid.to_string(),
                    question: question.to_string(),
                    candidates: vec![cand],
                });
            }
        }
    }
    for (id, (title, sents)) in doc_sents {
        if sents.keys().copied().ne(0..sents.len()) {
            return Err(Error::Integrity(format!("document {id} has gaps in its sentence ids")));
        }
        corpus.documents.insert(
            id.clone(),
            Document { doc_id: id, title, sentences: sents.into_values().collect() },
        );
    }
    attach_context(&corpus)
}

/// Reads ASNQ's `question \t sentence \t label` TSV. Consecutive lines with the
/// same question form one group; each group's sentences form its document.
/// Label 4 is positive, 1–3 negative.
pub fn read_asnq_tsv(path: &Path) -> Result<As2Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let mut corpus = As2Corpus::default();
    let mut sentences: Vec<String> = Vec::new();
    let flush = |corpus: &mut As2Corpus, sentences: &mut Vec<String>| {
        if let Some(g) = corpus.groups.last() {
            let doc_id = g.candidates[0].doc_id.clone();
            corpus.documents.insert(
                doc_id.clone(),
                Document { doc_id, title: None, sentences: std::mem::take(sentences) },
            );
        }
    };
    for (n, rec) in rdr.records().enumerate() {
        let at = || format!("{}:{}", path.display(), n + 1);
        let rec = rec.map_err(|e| Error::parse(at(), e.to_string()))?;
        if rec.len() != 3 {
            return Err(Error::parse(at(), format!("expected 3 columns, got {}", rec.len())));
        }
        let label = match rec[2].trim() {
            "4" => 1,
            "1" | "2" | "3" => 0,
            other => return Err(Error::parse(at(), format!("bad label {other:?}"))),
        };
        let new_group = corpus.groups.last().is_none_or(|g| g.question != rec[0]);
        if new_group {
            flush(&mut corpus, &mut sentences);
            let qid = format!("asnq-{}", corpus.groups.len());
            corpus.groups.push(QuestionGroup {
                question_id: qid,
                question: rec[0].to_string(),
                candidates: Vec::new(),
            });
        }
        let g = corpus.groups.last_mut().expect("group exists");
        g.candidates.push(Candidate {
            sentence: rec[1].to_string(),
            prev: None,
            next: None,
            doc_id: format!("{}-doc", g.question_id),
            sent_index: sentences.len(),
            label,
        });
        sentences.push(rec[1].to_string());
    }
    flush(&mut corpus, &mut sentences);
    attach_context(&corpus)
}

/// Compares statistics of a user-supplied WikiQA training split with the
/// published size. Returns warnings; a mismatch is never an error.
pub fn wikiqa_train_sanity(stats: &CorpusStats) -> Vec<String> {
    let mut warnings = Vec::new();
    if stats.questions != WIKIQA_TRAIN_QUESTIONS {
        warnings.push(format!(
            "expected {WIKIQA_TRAIN_QUESTIONS} WikiQA training questions, found {}",
            stats.questions
        ));
    }
    let rel = (stats.candidates_per_question - WIKIQA_CANDIDATES_PER_QUESTION).abs()
        / WIKIQA_CANDIDATES_PER_QUESTION;
    if rel > 0.15 {
        warnings.push(format!(
            "expected about {WIKIQA_CANDIDATES_PER_QUESTION} candidates per question, found {:.2}",
            stats.candidates_per_question
        ));
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus_stats;

    #[test]
    fn wikiqa_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.tsv");
        std::fs::write(
            &path,
            "QuestionID\tQuestion\tDocumentID\tDocumentTitle\tSentenceID\tSentence\tLabel\n\
             Q1\thow are glacier caves formed?\tD1\tGlacier cave\tD1-0\tA partly submerged glacier cave.\t0\n\
             Q1\thow are glacier caves formed?\tD1\tGlacier cave\tD1-1\tThe ice facade is approximately 60 m high\t0\n\
             Q1\thow are glacier caves formed?\tD1\tGlacier cave\tD1-2\tA glacier cave is a cave formed within the ice of a glacier.\t1\n\
             Q2\twho?\tD1\tGlacier cave\tD1-1\tThe ice facade is approximately 60 m high\t1\n",
        )
        .unwrap();
        let c = read_wikiqa_tsv(&path).unwrap();
        c.validate().unwrap();
        assert_eq!(c.groups.len(), 2);
        assert_eq!(c.groups[0].labels(), [0, 0, 1]);
        assert_eq!(c.documents["D1"].sentences.len(), 3);
        assert_eq!(c.groups[1].candidates[0].prev.as_deref(), Some("A partly submerged glacier cave."));
        assert_eq!(c.documents["D1"].title.as_deref(), Some("Glacier cave"));
    }

    #[test]
    fn asnq_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tsv");
        std::fs::write(&path, "q one\ts0\t1\nq one\ts1\t4\nq two\tt0\t3\n").unwrap();
        let c = read_asnq_tsv(&path).unwrap();
        c.validate().unwrap();
        assert_eq!(c.groups.len(), 2);
        assert_eq!(c.groups[0].labels(), [0, 1]);
        assert_eq!(c.groups[0].candidates[1].prev.as_deref(), Some("s0"));
        assert_eq!(c.documents.len(), 2);

        std::fs::write(&path, "q\ts\t7\n").unwrap();
        assert!(matches!(read_asnq_tsv(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn sanity_warns_but_never_fails() {
        let c = crate::data::fixtures::corpus_with_labels(&[&[1, 0]]);
        let w = wikiqa_train_sanity(&corpus_stats(&c));
        assert_eq!(w.len(), 2);
    }
}
