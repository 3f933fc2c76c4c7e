//! Seeded synthetic AS2 corpora in which the answer can only be found from
//! local context, only from document content, or (mixed) either one.
//!
//! Every candidate of a question has the same surface text, so a model that
//! sees only the question/answer pair is reduced to the tie-break rule.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{attach_context, As2Corpus, Candidate, Document, QuestionGroup};

const NAMES: [&str; 16] = [
    "anna", "boris", "clara", "dmitri", "elena", "felix", "greta", "hugo", "irene", "jonas", "karin",
    "lukas", "marta", "nils", "olga", "pavel",
];
const JOBS: [&str; 8] = ["singer", "painter", "actor", "writer", "dancer", "pilot", "doctor", "farmer"];
const RELEVANT: [&str; 10] = [
    "river", "bridge", "harbor", "canal", "ferry", "island", "shore", "tide", "dock", "lagoon",
];
const DISTRACTOR: [&str; 10] = [
    "desert", "canyon", "dune", "mesa", "cactus", "oasis", "sand", "rock", "ridge", "plateau",
];
const FILLER: &str = "more is written below .";
const TARGET: &str = "the answer is here .";

/// Number of candidates per synthetic question.
pub const CANDIDATES: usize = 4;

/// One document of four people, each "<name> is a <job> ." followed by the
/// same "she was born in <year> .", then a closing sentence. The question
/// names a job; the positive is the birth sentence right after that job.
fn local_group(rng: &mut ChaCha8Rng, qid: &str, corpus: &mut As2Corpus) {
    let names: Vec<&str> = NAMES.choose_multiple(rng, CANDIDATES).copied().collect();
    let jobs: Vec<&str> = JOBS.choose_multiple(rng, CANDIDATES).copied().collect();
    let year = rng.random_range(1900..2000);
    let target = rng.random_range(0..CANDIDATES);
    let born = format!("she was born in {year} .");
    let mut sentences = Vec::with_capacity(2 * CANDIDATES);
    for (n, j) in names.iter().zip(&jobs) {
        sentences.push(format!("{n} is a {j} ."));
        sentences.push(born.clone());
    }
    sentences.push("that is all .".into());
    let doc = Document { doc_id: format!("{qid}-doc"), title: None, sentences };
    let candidates = (0..CANDIDATES)
        .map(|k| candidate(&doc, 2 * k + 1, u8::from(k == target)))
        .collect();
    corpus.groups.push(QuestionGroup {
        question_id: qid.to_string(),
        question: format!("when was the {} born ?", jobs[target]),
        candidates,
    });
    corpus.documents.insert(doc.doc_id.clone(), doc);
}

/// Four documents `[topic, filler, target, filler, topic]` that differ only
/// in their topic sentences; the positive comes from the one document whose
/// topic words are drawn from the relevant pool.
fn global_group(rng: &mut ChaCha8Rng, qid: &str, corpus: &mut As2Corpus) {
    let target = rng.random_range(0..CANDIDATES);
    let subject = NAMES.choose(rng).copied().unwrap_or("anna");
    let mut candidates = Vec::with_capacity(CANDIDATES);
    for k in 0..CANDIDATES {
        let pool: &[&str] = if k == target { &RELEVANT } else { &DISTRACTOR };
        let topic = |rng: &mut ChaCha8Rng| {
            let w: Vec<&str> = pool.choose_multiple(rng, 3).copied().collect();
            format!("it tells of the {} , the {} and the {} .", w[0], w[1], w[2])
        };
        let first = topic(rng);
        let last = topic(rng);
        let doc = Document {
            doc_id: format!("{qid}-doc{k}"),
            title: None,
            sentences: vec![first, FILLER.into(), TARGET.into(), FILLER.into(), last],
        };
        candidates.push(candidate(&doc, 2, u8::from(k == target)));
        corpus.documents.insert(doc.doc_id.clone(), doc);
    }
    corpus.groups.push(QuestionGroup {
        question_id: qid.to_string(),
        question: format!("what did {subject} find ?"),
        candidates,
    });
}

fn candidate(doc: &Document, i: usize, label: u8) -> Candidate {
    Candidate {
        sentence: doc.sentences[i].clone(),
        prev: None,
        next: None,
        doc_id: doc.doc_id.clone(),
        sent_index: i,
        label,
    }
}

fn finish(corpus: As2Corpus) -> As2Corpus {
    attach_context(&corpus).expect("synthetic candidates reference their documents")
}

/// Questions answerable only through the preceding sentence.
pub fn local_task(questions: usize, seed: u64) -> As2Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = As2Corpus { groups: Vec::new(), documents: BTreeMap::new() };
    for q in 0..questions {
        local_group(&mut rng, &format!("L{seed}-{q}"), &mut c);
    }
    finish(c)
}

/// Questions answerable only through the candidate's document.
pub fn global_task(questions: usize, seed: u64) -> As2Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = As2Corpus { groups: Vec::new(), documents: BTreeMap::new() };
    for q in 0..questions {
        global_group(&mut rng, &format!("G{seed}-{q}"), &mut c);
    }
    finish(c)
}

/// Half local, half global questions, shuffled.
pub fn mixed_task(questions: usize, seed: u64) -> As2Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = As2Corpus { groups: Vec::new(), documents: BTreeMap::new() };
    for q in 0..questions {
        if q % 2 == 0 {
            local_group(&mut rng, &format!("M{seed}-{q}"), &mut c);
        } else {
            global_group(&mut rng, &format!("M{seed}-{q}"), &mut c);
        }
    }
    c.groups.shuffle(&mut rng);
    finish(c)
}
