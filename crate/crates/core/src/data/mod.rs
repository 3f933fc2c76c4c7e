//! AS2 corpora: candidate sentences grouped by question, with the documents
//! they were drawn from.

mod adapters;
mod jsonl;
mod split;
mod squad;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize, Vocabulary};

pub use adapters::{read_asnq_tsv, read_wikiqa_tsv, wikiqa_train_sanity, WIKIQA_TRAIN_QUESTIONS};
pub use jsonl::{docs_sidecar_path, load_corpus, save_corpus};
pub use split::{split_sentences, SentenceSpan};
pub use squad::{convert_squad, convert_squad_str, Conversion, DocumentUnit, SquadOptions};

/// A source document: an ordered, non-empty list of sentences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: Option<String>,
    pub sentences: Vec<String>,
}

/// One candidate answer sentence with its local context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub sentence: String,
    pub prev: Option<String>,
    pub next: Option<String>,
    pub doc_id: String,
    pub sent_index: usize,
    pub label: u8,
}

impl Candidate {
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionGroup {
    pub question_id: String,
    pub question: String,
    pub candidates: Vec<Candidate>,
}

impl QuestionGroup {
    pub fn labels(&self) -> Vec<u8> {
        self.candidates.iter().map(|c| c.label).collect()
    }

    pub fn positives(&self) -> usize {
        self.candidates.iter().filter(|c| c.is_positive()).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct As2Corpus {
    pub groups: Vec<QuestionGroup>,
    pub documents: BTreeMap<String, Document>,
}

impl As2Corpus {
    pub fn pairs(&self) -> usize {
        self.groups.iter().map(|g| g.candidates.len()).sum()
    }

    pub fn group(&self, question_id: &str) -> Option<&QuestionGroup> {
        self.groups.iter().find(|g| g.question_id == question_id)
    }

    /// Checks every structural invariant of the corpus.
    pub fn validate(&self) -> Result<()> {
        for (id, doc) in &self.documents {
            if doc.doc_id != *id {
                return Err(Error::Integrity(format!("document key {id} holds {}", doc.doc_id)));
            }
            if doc.sentences.is_empty() {
                return Err(Error::Integrity(format!("document {id} has no sentences")));
            }
        }
        for g in &self.groups {
            if g.question.trim().is_empty() {
                return Err(Error::Integrity(format!("question {} is empty", g.question_id)));
            }
            if g.candidates.is_empty() {
                return Err(Error::Integrity(format!("question {} has no candidates", g.question_id)));
            }
            for (i, c) in g.candidates.iter().enumerate() {
                if c.label > 1 {
                    return Err(Error::Integrity(format!(
                        "candidate {i} of {} has label {}",
                        g.question_id, c.label
                    )));
                }
                let doc = self.resolve(g, i)?;
                if doc.sentences[c.sent_index] != c.sentence {
                    return Err(Error::Integrity(format!(
                        "candidate {i} of {} does not match {}[{}]",
                        g.question_id, c.doc_id, c.sent_index
                    )));
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, g: &QuestionGroup, i: usize) -> Result<&Document> {
        let c = &g.candidates[i];
        let doc = self.documents.get(&c.doc_id).ok_or_else(|| {
            Error::Integrity(format!(
                "candidate {i} of question {} references unknown document {}",
                g.question_id, c.doc_id
            ))
        })?;
        if c.sent_index >= doc.sentences.len() {
            return Err(Error::Integrity(format!(
                "candidate {i} of question {} points past the end of {}",
                g.question_id, c.doc_id
            )));
        }
        Ok(doc)
    }
}

/// Keeps the questions having at least one positive and one negative candidate.
pub fn filter_clean(corpus: &As2Corpus) -> As2Corpus {
    let groups: Vec<QuestionGroup> = corpus
        .groups
        .iter()
        .filter(|g| {
            let pos = g.positives();
            pos >= 1 && pos < g.candidates.len()
        })
        .cloned()
        .collect();
    let used: HashSet<&str> = groups
        .iter()
        .flat_map(|g| g.candidates.iter().map(|c| c.doc_id.as_str()))
        .collect();
    let documents = corpus
        .documents
        .iter()
        .filter(|(id, _)| used.contains(id.as_str()))
        .map(|(id, d)| (id.clone(), d.clone()))
        .collect();
    As2Corpus { groups, documents }
}

/// Fills each candidate's `prev`/`next` from its owning document.
pub fn attach_context(corpus: &As2Corpus) -> Result<As2Corpus> {
    let mut out = corpus.clone();
    for g in out.groups.iter_mut() {
        for i in 0..g.candidates.len() {
            let doc = corpus.resolve(g, i)?;
            let c = &mut g.candidates[i];
            c.prev = c
                .sent_index
                .checked_sub(1)
                .map(|p| doc.sentences[p].clone());
            c.next = doc.sentences.get(c.sent_index + 1).cloned();
        }
    }
    Ok(out)
}

/// Sparse bag of words for a document, keyed by vocabulary id.
pub fn doc_bow(doc: &Document, vocab: &Vocabulary) -> BTreeMap<usize, f64> {
    let mut bow = BTreeMap::new();
    for s in &doc.sentences {
        for id in vocab.encode_tokens(&tokenize(s)) {
            *bow.entry(id).or_insert(0.0) += 1.0;
        }
    }
    bow
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub questions: usize,
    pub pairs: usize,
    pub positives: usize,
    pub documents: usize,
    pub without_positive: usize,
    pub candidates_per_question: f64,
    pub positives_per_question: f64,
}

pub fn corpus_stats(corpus: &As2Corpus) -> CorpusStats {
    let questions = corpus.groups.len();
    let pairs = corpus.pairs();
    let positives = corpus.groups.iter().map(QuestionGroup::positives).sum();
    let per = |n: usize| if questions == 0 { 0.0 } else { n as f64 / questions as f64 };
    CorpusStats {
        questions,
        pairs,
        positives,
        documents: corpus.documents.len(),
        without_positive: corpus.groups.iter().filter(|g| g.positives() == 0).count(),
        candidates_per_question: per(pairs),
        positives_per_question: per(positives),
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::text::{build_vocab, UNK_ID};

    #[test]
    fn clean_filter_keeps_mixed_groups_only() {
        let c = corpus_with_labels(&[&[1, 0], &[0, 0], &[1, 1], &[0, 1, 0]]);
        let f = filter_clean(&c);
        let kept: Vec<&str> = f.groups.iter().map(|g| g.question_id.as_str()).collect();
        assert_eq!(kept, ["q0", "q3"]);
        assert_eq!(f.documents.len(), 2);
        assert_eq!(filter_clean(&f), f);
    }

    #[test]
    fn context_from_neighbors() {
        let d = doc("d", &["One.", "Two.", "Three."]);
        let single = doc("s", &["Alone."]);
        let mut c = As2Corpus::default();
        c.groups.push(QuestionGroup {
            question_id: "q".into(),
            question: "Which?".into(),
            candidates: vec![cand(&d, 1, 1), cand(&d, 0, 0), cand(&single, 0, 0)],
        });
        c.documents.insert("d".into(), d);
        c.documents.insert("s".into(), single);
        let out = attach_context(&c).unwrap();
        let cs = &out.groups[0].candidates;
        assert_eq!(cs[0].prev.as_deref(), Some("One."));
        assert_eq!(cs[0].next.as_deref(), Some("Three."));
        assert_eq!(cs[1].prev, None);
        assert_eq!(cs[1].next.as_deref(), Some("Two."));
        assert_eq!((cs[2].prev.as_ref(), cs[2].next.as_ref()), (None, None));
        assert_eq!(out.groups[0].labels(), c.groups[0].labels());
    }

    #[test]
    fn dangling_doc_is_an_integrity_error() {
        let d = doc("d", &["One."]);
        let mut c = As2Corpus::default();
        let mut bad = cand(&d, 0, 1);
        bad.doc_id = "missing".into();
        c.groups.push(QuestionGroup {
            question_id: "q9".into(),
            question: "Q?".into(),
            candidates: vec![bad],
        });
        let err = attach_context(&c).unwrap_err();
        assert!(matches!(err, Error::Integrity(ref m) if m.contains("q9") && m.contains("missing")));
    }

    #[test]
    fn bow_counts() {
        let vocab = build_vocab(["a b"], 10, 1).unwrap();
        let bow = doc_bow(&doc("d", &["a b a"]), &vocab);
        assert_eq!(bow.get(&vocab.id("a").unwrap()), Some(&2.0));
        assert_eq!(bow.get(&vocab.id("b").unwrap()), Some(&1.0));
        assert_eq!(bow.len(), 2);

        assert!(doc_bow(&doc("e", &[""]), &vocab).is_empty());

        let bow = doc_bow(&doc("u", &["zebra"]), &vocab);
        assert_eq!(bow.get(&UNK_ID), Some(&1.0));
    }

    #[test]
    fn stats_summary() {
        let c = corpus_with_labels(&[&[1, 0, 0], &[0, 0]]);
        let s = corpus_stats(&c);
        assert_eq!((s.questions, s.pairs, s.positives, s.without_positive), (2, 5, 1, 1));
        assert_eq!(s.candidates_per_question, 2.5);
    }
}
