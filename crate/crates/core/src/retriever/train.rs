use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{weighted_bce, weighted_bce_logit_grad};
use super::model::{ModelConfig, Retriever};
use super::sweep::recall_sweep;
use super::{FeatureSet, RetrieverConfig, RetrieverError};
use crate::neural::sigmoid;
use crate::seed::{derive_seed, stage_rng};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub steps: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Log every `eval_every` steps and after the last step; 0 disables periodic logging.
    pub eval_every: usize,
    /// Inclusive distractor-count range for the late phase.
    pub distractors: (usize, usize),
    /// Backpropagate into the compressor as well as the head.
    pub train_compressor: bool,
    /// Query groups averaged into one SGD step.
    pub queries_per_step: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            seed: 0,
            learning_rate: 0.05,
            eval_every: 200,
            distractors: (2, 10),
            train_compressor: true,
            queries_per_step: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    /// Mean batch loss since the previous entry.
    pub loss: f64,
    pub recall: f64,
    pub precision: f64,
    /// Predictions clamped inside the loss since the previous entry.
    pub clamped: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Retriever,
    pub log: Vec<LogEntry>,
}

/// Every (query, image) score; row `q` holds query `q`. Each image is compressed once.
pub fn score_all(model: &Retriever, features: &FeatureSet) -> Result<Vec<Vec<f64>>, RetrieverError> {
    let tokens = features
        .images
        .iter()
        .map(|im| model.compress(&im.patches))
        .collect::<Result<Vec<_>, _>>()?;
    features
        .queries
        .iter()
        .map(|q| tokens.iter().map(|t| model.score_tokens(&q.query, t)).collect())
        .collect()
}

/// Pooled recall and precision at `threshold` over all (query, image) pairs.
pub fn evaluate(model: &Retriever, features: &FeatureSet, threshold: f64) -> Result<(f64, f64), RetrieverError> {
    let scores = score_all(model, features)?;
    let flat: Vec<f64> = scores.into_iter().flatten().collect();
    let labels: Vec<u8> = features.queries.iter().flat_map(|q| q.labels.iter().copied()).collect();
    let c = recall_sweep(&flat, &labels, &[threshold])?;
    Ok((c.points[0].recall, c.points[0].precision))
}

struct Sampler {
    /// Per eligible query: (query index, positives, negatives).
    queries: Vec<(usize, Vec<usize>, Vec<usize>)>,
    /// Per image: which queries it is positive for.
    profile: Vec<Vec<u8>>,
}

impl Sampler {
    fn new(features: &FeatureSet) -> Result<Self, RetrieverError> {
        let n = features.images.len();
        let mut queries = Vec::new();
        for (qi, q) in features.queries.iter().enumerate() {
            if q.labels.len() != n {
                return Err(RetrieverError::Format(format!(
                    "query {} has {} labels for {n} images",
                    q.anchor,
                    q.labels.len()
                )));
            }
            let pos: Vec<usize> = (0..n).filter(|&i| q.labels[i] > 0).collect();
            let neg: Vec<usize> = (0..n).filter(|&i| q.labels[i] == 0).collect();
            if !pos.is_empty() && !neg.is_empty() {
                queries.push((qi, pos, neg));
            }
        }
        if queries.is_empty() {
            return Err(RetrieverError::NoTrainingPairs);
        }
        let profile = (0..n)
            .map(|i| features.queries.iter().map(|q| q.labels[i]).collect())
            .collect();
        Ok(Self { queries, profile })
    }

    /// A negative sharing no positive query with `pos`, else any negative.
    fn easy_negative(&self, pos: usize, neg: &[usize], rng: &mut impl Rng) -> usize {
        let easy: Vec<usize> = neg
            .iter()
            .copied()
            .filter(|&n| self.profile[n].iter().zip(&self.profile[pos]).all(|(a, b)| a & b == 0))
            .collect();
        *easy.choose(rng).unwrap_or_else(|| neg.choose(rng).expect("non-empty"))
    }
}

/// SGD on weighted BCE. Before `schedule_split · steps`, each batch is one
/// positive plus one easy negative for a random query; afterwards, one
/// positive plus `U{distractors}` random negatives.
pub fn train(
    features: &FeatureSet,
    model_config: ModelConfig,
    config: &RetrieverConfig,
    opts: &TrainOptions,
) -> Result<TrainOutput, RetrieverError> {
    config.validate()?;
    if model_config.d != features.d {
        return Err(RetrieverError::Config(format!(
            "model width {} does not match feature width {}",
            model_config.d, features.d
        )));
    }
    let (lo, hi) = opts.distractors;
    if opts.queries_per_step == 0 {
        return Err(RetrieverError::Config("queries_per_step must be positive".into()));
    }
    if lo == 0 || lo > hi {
        return Err(RetrieverError::Config(format!("bad distractor range {lo}..={hi}")));
    }
    let mut model = Retriever::new(model_config, derive_seed(opts.seed, "init"));
    let sampler = Sampler::new(features)?;
    let mut rng = stage_rng(opts.seed, "train/batches");
    let split_step = (config.schedule_split * opts.steps as f64).floor() as usize;
    let mut log = Vec::new();
    let (mut loss_sum, mut loss_n, mut clamped) = (0.0, 0usize, 0usize);

    for step in 0..opts.steps {
        let mut batch = Vec::new();
        for _ in 0..opts.queries_per_step {
            let (qi, pos, neg) = &sampler.queries[rng.gen_range(0..sampler.queries.len())];
            let p = pos[rng.gen_range(0..pos.len())];
            batch.push((*qi, p, 1u8));
            if step < split_step {
                batch.push((*qi, sampler.easy_negative(p, neg, &mut rng), 0));
            } else {
                let k = rng.gen_range(lo..=hi).min(neg.len());
                batch.extend(neg.choose_multiple(&mut rng, k).map(|&n| (*qi, n, 0)));
            }
        }

        let last_good = model.params.clone();
        model.params.zero_grad();
        let scale = 1.0 / batch.len() as f64;
        let mut batch_loss = 0.0;
        for &(qi, img, label) in &batch {
            let query = &features.queries[qi].query;
            let (tokens, cc) = model.compress_cached(&features.images[img].patches)?;
            let (logit, hc) = model.head_logit(query, &tokens)?;
            let s = sigmoid(logit);
            let out = weighted_bce(s, label, config.positive_weight);
            clamped += usize::from(out.clamped);
            batch_loss += out.loss * scale;
            let d_logit = weighted_bce_logit_grad(s, label, config.positive_weight) * scale;
            let (_, d_tokens) = model.head_backward(&hc, d_logit)?;
            if opts.train_compressor {
                model.compress_backward(&cc, &d_tokens)?;
            }
        }
        if !batch_loss.is_finite() {
            model.params = last_good;
            return Err(RetrieverError::Diverged {
                step,
                last_good: Box::new(model),
            });
        }
        model.params.sgd_step(opts.learning_rate);
        if !model.params.is_finite() {
            model.params = last_good;
            return Err(RetrieverError::Diverged {
                step,
                last_good: Box::new(model),
            });
        }
        loss_sum += batch_loss;
        loss_n += 1;

        let done = step + 1;
        if (opts.eval_every > 0 && done % opts.eval_every == 0) || done == opts.steps {
            let (recall, precision) = evaluate(&model, features, config.threshold)?;
            log.push(LogEntry {
                step: done,
                loss: loss_sum / loss_n as f64,
                recall,
                precision,
                clamped,
            });
            log::debug!(
                "step {done}: loss {:.4} recall {recall:.3} precision {precision:.3}",
                loss_sum / loss_n as f64
            );
            (loss_sum, loss_n, clamped) = (0.0, 0, 0);
        }
    }
    Ok(TrainOutput { model, log })
}
