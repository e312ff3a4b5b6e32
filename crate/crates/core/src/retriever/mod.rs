//! Query-aware image retrieval at toy scale: learned-query token
//! compression, a sigmoid relevance head, threshold filtering, and a
//! recall-weighted trainer.

pub mod features;
pub mod filter;
pub mod loss;
pub mod model;
pub mod reader;
pub mod sweep;
pub mod train;

pub use features::{synth_features, FeatureSet, ImageFeatures, QueryFeatures, SynthFeatureParams};
pub use filter::{context_tokens, filter};
pub use loss::{weighted_bce, BceOutput};
pub use model::{ModelConfig, Retriever};
pub use reader::{filter_then_read, random_cap_read, ReadOutcome};
pub use sweep::{cosine_baseline, default_thresholds, recall_sweep, SweepCurve, SweepPoint};
pub use train::{evaluate, score_all, train, LogEntry, TrainOptions, TrainOutput};

use crate::neural::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverConfig {
    pub threshold: f64,
    pub top_k_cap: Option<usize>,
    pub positive_weight: f64,
    pub schedule_split: f64,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            top_k_cap: None,
            positive_weight: 5.0,
            schedule_split: 0.6,
        }
    }
}

impl RetrieverConfig {
    pub fn validate(&self) -> Result<(), RetrieverError> {
        let bad = |m: String| Err(RetrieverError::Config(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.top_k_cap == Some(0) {
            return bad("top-k cap must be positive".into());
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return bad(format!("positive weight {} must be > 0", self.positive_weight));
        }
        if !(self.schedule_split > 0.0 && self.schedule_split < 1.0) {
            return bad(format!("schedule split {} outside (0, 1)", self.schedule_split));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetrieverError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature file: {0}")]
    Format(String),
    #[error("cannot filter an empty score list")]
    EmptyScores,
    #[error("no query has both relevant and irrelevant images")]
    NoTrainingPairs,
    #[error("training diverged at step {step}")]
    Diverged { step: usize, last_good: Box<Retriever> },
    #[error("no query features for anchor {0:?}")]
    MissingQuery(String),
    #[error("no features for image {0:?}")]
    MissingImage(String),
    #[error(transparent)]
    Io(std::io::Error),
}
