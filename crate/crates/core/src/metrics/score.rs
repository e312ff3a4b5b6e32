use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bootstrap, MetricsError};
use crate::adapters::{Normalized, Transcript};
use crate::haystack::{Answer, BenchmarkSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub haystack_size: usize,
    pub correct: u8,
    pub compliant: u8,
    pub unevaluated: bool,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// In benchmark order.
    pub per_question: Vec<QuestionScore>,
    pub accuracy: f64,
    pub compliance_rate: f64,
}

impl EvalResult {
    pub fn correct_vector(&self) -> Vec<f64> {
        self.per_question.iter().map(|q| q.correct as f64).collect()
    }

    pub fn unevaluated_count(&self) -> usize {
        self.per_question.iter().filter(|q| q.unevaluated).count()
    }

    /// Per-question CSV: `question_id,haystack_size,correct,compliant,unevaluated,latency_ms`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "question_id",
            "haystack_size",
            "correct",
            "compliant",
            "unevaluated",
            "latency_ms",
        ])
        .expect("in-memory csv");
        for q in &self.per_question {
            w.write_record([
                q.question_id.clone(),
                q.haystack_size.to_string(),
                q.correct.to_string(),
                q.compliant.to_string(),
                (q.unevaluated as u8).to_string(),
                format!("{:.3}", q.latency_ms),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

/// Score a transcript against ground truth. Noncompliant replies count as
/// incorrect.
pub fn score(transcript: &Transcript, benchmark: &BenchmarkSet) -> Result<EvalResult, MetricsError> {
    let missing: Vec<String> = benchmark
        .specs
        .iter()
        .filter(|s| transcript.get(&s.question_id).is_none())
        .map(|s| s.question_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingQuestions(missing));
    }
    let per_question: Vec<QuestionScore> = benchmark
        .specs
        .iter()
        .map(|s| {
            let e = transcript.get(&s.question_id).expect("checked above");
            let (compliant, correct) = match (e.normalized, s.answer) {
                (Normalized::Noncompliant, _) => (0, 0),
                (Normalized::Yes, Answer::Yes) | (Normalized::No, Answer::No) => (1, 1),
                _ => (1, 0),
            };
            QuestionScore {
                question_id: s.question_id.clone(),
                haystack_size: s.haystack_size(),
                correct,
                compliant,
                unevaluated: e.unevaluated,
                latency_ms: e.latency_ms,
            }
        })
        .collect();
    let n = per_question.len().max(1) as f64;
    let accuracy = per_question.iter().map(|q| q.correct as f64).sum::<f64>() / n;
    let compliance_rate = per_question.iter().map(|q| q.compliant as f64).sum::<f64>() / n;
    Ok(EvalResult {
        per_question,
        accuracy,
        compliance_rate,
    })
}

/// One row of a by-size summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub compliance: f64,
}

/// Bootstrap accuracy per haystack size.
pub fn summarize_by_size(result: &EvalResult, resamples: usize, seed: u64) -> Result<Vec<SizeSummary>, MetricsError> {
    let mut groups: BTreeMap<usize, Vec<&QuestionScore>> = BTreeMap::new();
    for q in &result.per_question {
        groups.entry(q.haystack_size).or_default().push(q);
    }
    groups
        .into_iter()
        .map(|(size, qs)| {
            let correct: Vec<f64> = qs.iter().map(|q| q.correct as f64).collect();
            let stats = bootstrap(
                &correct,
                resamples,
                crate::seed::derive_seed(seed, &format!("size/{size}")),
            )?;
            Ok(SizeSummary {
                size,
                mean: stats.mean,
                std: stats.std,
                n: qs.len(),
                compliance: qs.iter().map(|q| q.compliant as f64).sum::<f64>() / qs.len() as f64,
            })
        })
        .collect()
}
