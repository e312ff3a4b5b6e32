use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::haystack::{Mode, QuestionSpec};

/// Prefix prepended to every benchmark question sent to an answerer.
pub const PROMPT_PREFIX: &str = "You are given a set of images. Please answer the following question in Yes or No: ";

/// Error string an adapter returns when a request exceeds its image capacity.
pub const TOO_MANY_IMAGES: &str = "too_many_images";

pub fn prompt_for(question_text: &str) -> String {
    format!("{PROMPT_PREFIX}{question_text}")
}

/// Recover the bare question from a prompted one.
pub fn strip_prompt(question: &str) -> &str {
    question.strip_prefix(PROMPT_PREFIX).unwrap_or(question)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub id: String,
    #[serde(default)]
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub mode: Mode,
    pub haystack_size: usize,
}

/// One question on the wire. Image order is haystack order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub id: String,
    pub question: String,
    pub images: Vec<ImageRef>,
    pub meta: RequestMeta,
}

impl AdapterRequest {
    /// Build the request for a benchmark question. Paths come from the corpus
    /// when one is given.
    pub fn from_spec(spec: &QuestionSpec, corpus: Option<&Corpus>) -> Self {
        let images = spec
            .haystack_ids
            .iter()
            .map(|id| ImageRef {
                id: id.clone(),
                path: corpus
                    .and_then(|c| c.get(id))
                    .map(|r| r.source_path.clone())
                    .unwrap_or_default(),
            })
            .collect();
        Self {
            id: spec.question_id.clone(),
            question: prompt_for(&spec.question_text),
            images,
            meta: RequestMeta {
                mode: spec.mode,
                haystack_size: spec.haystack_size(),
            },
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

/// Adapter reply: either a free-text `answer` or an `error`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AdapterResponse {
    pub fn answer(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            answer: Some(text.into()),
            error: None,
        }
    }

    pub fn error(id: Option<String>, error: impl Into<String>) -> Self {
        Self {
            id,
            answer: None,
            error: Some(error.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    #[serde(default)]
    pub max_images: Option<usize>,
}

/// First line an adapter may emit before any response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub capabilities: Capabilities,
}

/// Any line an adapter can write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterLine {
    Handshake(Capabilities),
    Response(AdapterResponse),
}

impl AdapterLine {
    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        let value: serde_json::Value = serde_json::from_str(line)?;
        if value.get("capabilities").is_some() {
            let h: Handshake = serde_json::from_value(value)?;
            return Ok(AdapterLine::Handshake(h.capabilities));
        }
        Ok(AdapterLine::Response(serde_json::from_value(value)?))
    }
}

/// Normalized answer bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalized {
    Yes,
    No,
    Noncompliant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub raw_text: String,
    pub normalized: Normalized,
}

/// Lowercase, trim whitespace and punctuation, then classify by the first
/// alphabetic token: `yes`, `no`, or anything else (noncompliant).
pub fn normalize_answer(raw_text: &str) -> Verdict {
    let lowered = raw_text.to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let first = trimmed.split(|c: char| !c.is_alphabetic()).find(|t| !t.is_empty());
    let normalized = match first {
        Some("yes") => Normalized::Yes,
        Some("no") => Normalized::No,
        _ => Normalized::Noncompliant,
    };
    Verdict {
        raw_text: raw_text.to_string(),
        normalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("Yes, there is a dog.").normalized, Normalized::Yes);
        assert_eq!(normalize_answer("  NO").normalized, Normalized::No);
        assert_eq!(
            normalize_answer("I cannot determine this.").normalized,
            Normalized::Noncompliant
        );
        assert_eq!(normalize_answer("**No**").normalized, Normalized::No);
        assert_eq!(normalize_answer("").normalized, Normalized::Noncompliant);
        assert_eq!(normalize_answer("Nope").normalized, Normalized::Noncompliant);
        assert_eq!(normalize_answer("Maybe").normalized, Normalized::Noncompliant);
    }

    #[test]
    fn prompt_roundtrip() {
        let q = "For the image with truck, is there dog?";
        let p = prompt_for(q);
        assert!(p.starts_with("You are given a set of images. Please answer the following question in Yes or No: For"));
        assert_eq!(strip_prompt(&p), q);
    }

    #[test]
    fn wire_shapes() {
        let req = AdapterRequest {
            id: "q1".into(),
            question: "Q".into(),
            images: vec![ImageRef {
                id: "a".into(),
                path: "a.jpg".into(),
            }],
            meta: RequestMeta {
                mode: Mode::Single,
                haystack_size: 10,
            },
        };
        assert_eq!(
            req.to_line(),
            r#"{"id":"q1","question":"Q","images":[{"id":"a","path":"a.jpg"}],"meta":{"mode":"single","haystack_size":10}}"#
        );
        assert_eq!(
            AdapterLine::parse(r#"{"capabilities":{"max_images":4}}"#).unwrap(),
            AdapterLine::Handshake(Capabilities { max_images: Some(4) })
        );
        assert_eq!(
            AdapterLine::parse(r#"{"id":"q1","answer":"yes"}"#).unwrap(),
            AdapterLine::Response(AdapterResponse::answer("q1", "yes"))
        );
        let e = AdapterResponse::error(Some("q2".into()), TOO_MANY_IMAGES);
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"id":"q2","error":"too_many_images"}"#
        );
    }
}
