//! Non-LMM baselines and scripted answerers.

mod caption;
mod detector;
mod scripted;

use thiserror::Error;

use crate::haystack::Mode;

pub use caption::{
    caption_aggregate, render_aggregation_prompt, CaptionOutcome, ScriptedCaptionReader, ScriptedCaptioner,
    AGGREGATION_TEMPLATE_V1, CAPTION_PROMPT,
};
pub use detector::{
    detector_oracle_multi, detector_oracle_single, run_detector_oracle, DetectionTable, DEFAULT_ANCHOR_THRESHOLD,
    DEFAULT_TARGET_THRESHOLD,
};
pub use scripted::{ground_truth_for, Curve, FixedReply, Profile, ScriptedAdapter};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("empty haystack")]
    EmptyHaystack,
    #[error("oracle does not apply to mode {0}")]
    WrongMode(Mode),
    #[error("unknown scripted profile {0:?}")]
    UnknownProfile(String),
    #[error("detection table: {0}")]
    Parse(String),
}
