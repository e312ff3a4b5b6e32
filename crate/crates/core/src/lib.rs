//! Visual needle-in-a-haystack tooling.
//!
//! The crate covers the full loop around multi-image yes/no question answering
//! over large image collections:
//!
//! - [`corpus`] loads object-annotated image corpora and answers presence queries.
//! - [`haystack`] generates balanced single- and multi-needle benchmarks.
//! - [`adapters`] defines the answerer wire protocol and dispatches questions.
//! - [`oracles`] holds detector/caption baselines and scripted answerers.
//! - [`metrics`] scores transcripts, bootstraps error bars and builds positional-bias grids.
//! - [`neural`] is a small f64 tensor kernel with hand-written backward passes.
//! - [`retriever`] implements learned-query compression, query-aware relevance
//!   scoring, relevance filtering and the recall-weighted trainer.
//! - [`miqa`] builds multi-image instruction data from single-image QA items.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod adapters;
pub mod corpus;
pub mod haystack;
pub mod manifest;
pub mod metrics;
pub mod miqa;
pub mod neural;
pub mod oracles;
pub mod retriever;
pub mod seed;
pub mod synth;

pub use adapters::{AdapterRequest, Answer, Endpoint, Transcript, Verdict};
pub use corpus::{Corpus, ImageRecord, PresenceIndex};
pub use haystack::{BenchmarkSet, Mode, QuestionSpec};

/// Version string embedded in generated artifacts.
pub const GENERATOR_VERSION: &str = concat!("vhaystack/", env!("CARGO_PKG_VERSION"));
