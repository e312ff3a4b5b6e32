//! Answerer wire protocol and dispatch.
//!
//! Requests and responses are single-line JSON objects. The same schema is
//! carried over a child process's standard streams or an HTTP POST, and
//! in-process [`Answerer`]s plug in directly.

pub mod conformance;
mod dispatch;
mod protocol;
mod serve;

pub use dispatch::{
    dispatch, dispatch_requests, Answerer, DispatchError, DispatchOptions, Endpoint, Transcript, TranscriptEntry,
};
pub use protocol::{
    normalize_answer, prompt_for, strip_prompt, AdapterLine, AdapterRequest, AdapterResponse, Capabilities, Handshake,
    ImageRef, Normalized, RequestMeta, Verdict, PROMPT_PREFIX, TOO_MANY_IMAGES,
};
pub use serve::serve_lines;

pub use crate::haystack::Answer;
