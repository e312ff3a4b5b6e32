use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index::sample;

use super::filter::{context_tokens, filter};
use super::model::Retriever;
use super::{FeatureSet, RetrieverConfig, RetrieverError};
use crate::adapters::{normalize_answer, AdapterRequest, Answerer, Transcript, TranscriptEntry};
use crate::corpus::Corpus;
use crate::haystack::BenchmarkSet;
use crate::neural::Mat;
use crate::seed::stage_rng;

#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub transcript: Transcript,
    /// Images passed to the reader, per question in benchmark order.
    pub retained: Vec<usize>,
    /// Downstream context tokens per question.
    pub context_tokens: Vec<usize>,
}

fn ask(reader: &dyn Answerer, mut request: AdapterRequest, keep: &[usize]) -> TranscriptEntry {
    let all = std::mem::take(&mut request.images);
    request.images = keep.iter().map(|&i| all[i].clone()).collect();
    let start = Instant::now();
    let resp = reader.respond(&request);
    let latency_ms = start.elapsed().as_secs_f64() * 1e3;
    let raw = resp.answer.unwrap_or_default();
    let v = normalize_answer(&raw);
    TranscriptEntry {
        question_id: request.id,
        raw_text: v.raw_text,
        normalized: v.normalized,
        latency_ms,
        timed_out: false,
        unevaluated: false,
        error: resp.error,
    }
}

fn finish(mut entries: Vec<TranscriptEntry>, retained: Vec<usize>, context_tokens: Vec<usize>) -> ReadOutcome {
    entries.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    ReadOutcome {
        transcript: Transcript {
            capabilities: None,
            entries,
        },
        retained,
        context_tokens,
    }
}

/// Score every haystack image against the question's anchor query, keep the
/// filtered subset, and let `reader` answer from those images only.
pub fn filter_then_read(
    model: &Retriever,
    features: &FeatureSet,
    benchmark: &BenchmarkSet,
    corpus: &Corpus,
    config: &RetrieverConfig,
    reader: &dyn Answerer,
) -> Result<ReadOutcome, RetrieverError> {
    config.validate()?;
    let index = features.image_index();
    let mut tokens: HashMap<usize, Mat> = HashMap::new();
    let (mut entries, mut retained, mut ctx) = (Vec::new(), Vec::new(), Vec::new());
    for spec in &benchmark.specs {
        let query = features
            .query(&spec.anchor)
            .ok_or_else(|| RetrieverError::MissingQuery(spec.anchor.clone()))?;
        let mut scores = Vec::with_capacity(spec.haystack_ids.len());
        for id in &spec.haystack_ids {
            let i = *index
                .get(id.as_str())
                .ok_or_else(|| RetrieverError::MissingImage(id.clone()))?;
            if let std::collections::hash_map::Entry::Vacant(e) = tokens.entry(i) {
                e.insert(model.compress(&features.images[i].patches)?);
            }
            scores.push(model.score_tokens(&query.query, &tokens[&i])?);
        }
        let keep = filter(&scores, config)?;
        retained.push(keep.len());
        ctx.push(context_tokens(keep.len(), model.config.k));
        entries.push(ask(reader, AdapterRequest::from_spec(spec, Some(corpus)), &keep));
    }
    Ok(finish(entries, retained, ctx))
}

/// Baseline without retrieval: the reader sees `cap` haystack images chosen
/// uniformly at random (original order kept).
pub fn random_cap_read(
    benchmark: &BenchmarkSet,
    corpus: &Corpus,
    cap: usize,
    seed: u64,
    reader: &dyn Answerer,
) -> ReadOutcome {
    let (mut entries, mut retained) = (Vec::new(), Vec::new());
    for spec in &benchmark.specs {
        let n = spec.haystack_ids.len();
        let mut rng = stage_rng(seed, &format!("random-cap/{}", spec.question_id));
        let mut keep = sample(&mut rng, n, cap.min(n)).into_vec();
        keep.sort_unstable();
        retained.push(keep.len());
        entries.push(ask(reader, AdapterRequest::from_spec(spec, Some(corpus)), &keep));
    }
    let ctx = vec![0; retained.len()];
    finish(entries, retained, ctx)
}
