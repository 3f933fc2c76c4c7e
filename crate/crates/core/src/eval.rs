//! Ranking metrics: average precision, precision at 1, and their means over
//! questions and across training runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::As2Corpus;
use crate::error::{Error, Result};
use crate::model::{Aux, Model, Ranking};

/// `(1/P) Σ_{k: label_k = 1} precision@k` over a ranked label list, or `None`
/// when there is no positive (the question is excluded from the mean).
pub fn average_precision(ranked_labels: &[u8]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &l) in ranked_labels.iter().enumerate() {
        if l == 1 {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// 1 iff the top-ranked candidate is positive.
pub fn p_at_1(ranked_labels: &[u8]) -> Result<u8> {
    ranked_labels
        .first()
        .map(|&l| u8::from(l == 1))
        .ok_or_else(|| Error::Input("precision at 1 of an empty ranking".into()))
}

/// Metrics of one epoch, or their mean/std across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub map: f64,
    pub map_std: f64,
    pub p1: f64,
    pub p1_std: f64,
    pub n_questions: usize,
    pub excluded: usize,
}

/// Per-question diagnostic row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub question_id: String,
    /// 1-based rank of the first positive; absent without positives.
    pub rank_of_first_positive: Option<usize>,
    pub ap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: EpochMetrics,
    pub questions: Vec<QuestionReport>,
}

/// Accumulates MAP/P@1 over ranked questions in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct MetricAccumulator {
    ap_sum: f64,
    p1_sum: f64,
    counted: usize,
    excluded: usize,
    reports: Vec<QuestionReport>,
}

impl MetricAccumulator {
    pub fn push(&mut self, question_id: &str, ranked_labels: &[u8]) -> Result<()> {
        let ap = average_precision(ranked_labels);
        let first = ranked_labels.iter().position(|&l| l == 1).map(|p| p + 1);
        match ap {
            Some(ap) => {
                self.ap_sum += ap;
                self.p1_sum += f64::from(p_at_1(ranked_labels)?);
                self.counted += 1;
            }
            None => self.excluded += 1,
        }
        self.reports.push(QuestionReport {
            question_id: question_id.to_string(),
            rank_of_first_positive: first,
            ap,
        });
        Ok(())
    }

    pub fn finish(self, epoch: usize) -> Evaluation {
        let n = self.counted;
        let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
        Evaluation {
            metrics: EpochMetrics {
                epoch,
                map: mean(self.ap_sum),
                map_std: 0.0,
                p1: mean(self.p1_sum),
                p1_std: 0.0,
                n_questions: n,
                excluded: self.excluded,
            },
            questions: self.reports,
        }
    }
}

/// Ranks every question of `corpus` with `model` and averages AP and P@1
/// over the questions that have at least one positive.
pub fn evaluate(model: &Model, corpus: &As2Corpus, aux: &Aux) -> Result<Evaluation> {
    let mut acc = MetricAccumulator::default();
    for g in &corpus.groups {
        let ranking = model.rank(g, aux)?;
        acc.push(&g.question_id, &ranking.ranked_labels(g))?;
    }
    Ok(acc.finish(0))
}

/// Same as [`evaluate`] but from precomputed logits, one vector per group.
pub fn evaluate_logits(corpus: &As2Corpus, logits: &[Vec<f64>]) -> Result<Evaluation> {
    if logits.len() != corpus.groups.len() {
        return Err(Error::Input("one logit vector per question is required".into()));
    }
    let mut acc = MetricAccumulator::default();
    for (g, l) in corpus.groups.iter().zip(logits) {
        if l.len() != g.candidates.len() {
            return Err(Error::Input(format!("logit count mismatch for {}", g.question_id)));
        }
        let ranking = Ranking::new(g, l.clone());
        acc.push(&g.question_id, &ranking.ranked_labels(g))?;
    }
    Ok(acc.finish(0))
}

fn mean_std(values: &mut [f64]) -> (f64, f64) {
    // Sorting first makes the result independent of run order.
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / n).sqrt())
}

/// Per-epoch mean and population standard deviation across runs.
pub fn aggregate_runs(runs: &[Vec<EpochMetrics>]) -> Result<Vec<EpochMetrics>> {
    let first = runs.first().ok_or_else(|| Error::Input("no runs to aggregate".into()))?;
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(Error::Input("runs have different epoch counts".into()));
    }
    (0..first.len())
        .map(|e| {
            let epoch = first[e].epoch;
            if runs.iter().any(|r| r[e].epoch != epoch) {
                return Err(Error::Input(format!("runs disagree on epoch numbering at row {e}")));
            }
            let mut maps: Vec<f64> = runs.iter().map(|r| r[e].map).collect();
            let mut p1s: Vec<f64> = runs.iter().map(|r| r[e].p1).collect();
            let (map, map_std) = mean_std(&mut maps);
            let (p1, p1_std) = mean_std(&mut p1s);
            Ok(EpochMetrics {
                epoch,
                map,
                map_std,
                p1,
                p1_std,
                n_questions: first[e].n_questions,
                excluded: first[e].excluded,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    epo: usize,
    map: f64,
    map_std: f64,
    p1: f64,
    p1_std: f64,
}

/// Writes `epo,map,map_std,p1,p1_std`, with shortest round-trip floats.
pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for m in metrics {
        w.serialize(CsvRow { epo: m.epoch, map: m.map, map_std: m.map_std, p1: m.p1, p1_std: m.p1_std })
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| {
            let row: CsvRow = row.map_err(|e| csv_err(path, e))?;
            Ok(EpochMetrics {
                epoch: row.epo,
                map: row.map,
                map_std: row.map_std,
                p1: row.p1,
                p1_std: row.p1_std,
                n_questions: 0,
                excluded: 0,
            })
        })
        .collect()
}

/// Writes `question_id  rank_of_first_positive  ap` as TSV; missing values are empty.
pub fn write_question_tsv(path: &Path, reports: &[QuestionReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    for r in reports {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path.display().to_string(), e.to_string())
}
