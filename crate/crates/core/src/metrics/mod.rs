//! Scoring, bootstrap error bars, positional-bias grids and reports.

mod bias;
mod bootstrap;
mod report;
mod score;

use thiserror::Error;

pub use bias::{exhaustive_depths, positional_bias_run, BiasCell, BiasGrid, BiasParams, DEFAULT_DEPTHS};
pub use bootstrap::{bootstrap, BootstrapStats, DEFAULT_RESAMPLES};
pub use report::{emit_report, ReportInput};
pub use score::{score, summarize_by_size, EvalResult, QuestionScore, SizeSummary};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("transcript is missing {} question(s): {}", .0.len(), .0.join(", "))]
    MissingQuestions(Vec<String>),
    #[error("bootstrap needs a non-empty sample")]
    EmptySample,
    #[error("bootstrap needs at least one resample")]
    ZeroResamples,
    #[error("positional bias runs need single-needle questions, got {0}")]
    MultiNeedle(crate::haystack::Mode),
    #[error(transparent)]
    Generate(#[from] crate::haystack::GenError),
    #[error(transparent)]
    Dispatch(#[from] crate::adapters::DispatchError),
    #[error("cannot write report to {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
