use std::collections::HashMap;
use std::sync::Arc;

use super::OracleError;
use crate::adapters::{
    dispatch_requests, normalize_answer, AdapterRequest, AdapterResponse, Answerer, DispatchOptions, Endpoint,
    ImageRef, Normalized, RequestMeta,
};
use crate::corpus::Corpus;
use crate::haystack::{parse_question, QuestionSpec};

/// Instruction sent to the captioner for every image.
pub const CAPTION_PROMPT: &str = "Please provide detailed and concrete captions of the image";

/// Versioned aggregation template with `{captions}` and `{question}` placeholders.
pub const AGGREGATION_TEMPLATE_V1: &str = include_str!("../../assets/caption_aggregation_prompt.v1.txt");

const QUESTION_LEAD: &str = "please answer the following question: ";
const QUESTION_TAIL: &str = ". Please assume there must be at least one image";

/// Fill the aggregation template. Captions are numbered from 1 in the order given.
pub fn render_aggregation_prompt<S: AsRef<str>>(captions: &[S], question: &str) -> String {
    let block = captions
        .iter()
        .enumerate()
        .map(|(i, c)| format!("# Caption ({})\n{}", i + 1, c.as_ref()))
        .collect::<Vec<_>>()
        .join("\n");
    AGGREGATION_TEMPLATE_V1
        .trim_end()
        .replace("{captions}", &block)
        .replace("{question}", question)
}

#[derive(Debug, Clone)]
pub struct CaptionOutcome {
    pub normalized: Normalized,
    pub raw_text: String,
    /// Why the outcome is noncompliant, when an endpoint failed.
    pub cause: Option<String>,
    pub prompt: Option<String>,
}

impl CaptionOutcome {
    fn failed(cause: String, prompt: Option<String>) -> Self {
        Self {
            normalized: Normalized::Noncompliant,
            raw_text: String::new(),
            cause: Some(cause),
            prompt,
        }
    }
}

/// Caption every haystack image, then ask a text-only answerer to decide
/// from the numbered captions.
pub fn caption_aggregate(
    spec: &QuestionSpec,
    corpus: Option<&Corpus>,
    captioner: &Endpoint,
    llm: &Endpoint,
    opts: &DispatchOptions,
) -> Result<CaptionOutcome, OracleError> {
    if spec.haystack_ids.is_empty() {
        return Err(OracleError::EmptyHaystack);
    }
    let meta = RequestMeta {
        mode: spec.mode,
        haystack_size: spec.haystack_size(),
    };
    let caption_id = |i: usize| format!("{}/caption/{i:06}", spec.question_id);
    let requests: Vec<AdapterRequest> = spec
        .haystack_ids
        .iter()
        .enumerate()
        .map(|(i, id)| AdapterRequest {
            id: caption_id(i),
            question: CAPTION_PROMPT.to_string(),
            images: vec![ImageRef {
                id: id.clone(),
                path: corpus
                    .and_then(|c| c.get(id))
                    .map(|r| r.source_path.clone())
                    .unwrap_or_default(),
            }],
            meta: meta.clone(),
        })
        .collect();
    let captions = match dispatch_requests(&requests, captioner, opts) {
        Ok(t) => t,
        Err(e) => return Ok(CaptionOutcome::failed(format!("captioner: {e}"), None)),
    };
    let by_id: HashMap<&str, _> = captions.entries.iter().map(|e| (e.question_id.as_str(), e)).collect();
    let mut texts = Vec::with_capacity(requests.len());
    for i in 0..requests.len() {
        match by_id.get(caption_id(i).as_str()) {
            Some(e) if e.error.is_none() => texts.push(e.raw_text.clone()),
            Some(e) => {
                return Ok(CaptionOutcome::failed(
                    format!("captioner failed on image {i}: {}", e.error.clone().unwrap_or_default()),
                    None,
                ))
            }
            None => return Ok(CaptionOutcome::failed(format!("missing caption for image {i}"), None)),
        }
    }

    let prompt = render_aggregation_prompt(&texts, &spec.question_text);
    let request = AdapterRequest {
        id: format!("{}/aggregate", spec.question_id),
        question: prompt.clone(),
        images: Vec::new(),
        meta,
    };
    let reply = match dispatch_requests(std::slice::from_ref(&request), llm, opts) {
        Ok(t) => t,
        Err(e) => return Ok(CaptionOutcome::failed(format!("llm: {e}"), Some(prompt))),
    };
    let entry = &reply.entries[0];
    if let Some(err) = &entry.error {
        return Ok(CaptionOutcome::failed(format!("llm: {err}"), Some(prompt)));
    }
    let v = normalize_answer(&entry.raw_text);
    Ok(CaptionOutcome {
        normalized: v.normalized,
        raw_text: v.raw_text,
        cause: None,
        prompt: Some(prompt),
    })
}

const CAPTION_LEAD: &str = "A photo containing: ";

/// Captioner that lists the annotated labels of the image it receives.
pub struct ScriptedCaptioner {
    pub corpus: Arc<Corpus>,
}

impl Answerer for ScriptedCaptioner {
    fn respond(&self, request: &AdapterRequest) -> AdapterResponse {
        let Some(img) = request.images.first() else {
            return AdapterResponse::error(Some(request.id.clone()), "no image");
        };
        let labels: Vec<&str> = self
            .corpus
            .get(&img.id)
            .map(|r| r.object_labels.iter().map(String::as_str).collect())
            .unwrap_or_default();
        AdapterResponse::answer(request.id.clone(), format!("{CAPTION_LEAD}{}.", labels.join(", ")))
    }
}

/// Text answerer that parses the aggregation prompt produced with
/// [`ScriptedCaptioner`] captions and applies the question logic exactly.
pub struct ScriptedCaptionReader;

impl ScriptedCaptionReader {
    fn decide(prompt: &str) -> Option<bool> {
        let start = prompt.find(QUESTION_LEAD)? + QUESTION_LEAD.len();
        let end = start + prompt[start..].find(QUESTION_TAIL)?;
        let (mode, anchor, target) = parse_question(&prompt[start..end])?;
        let mut presence = Vec::new();
        for line in prompt.lines() {
            let Some(list) = line.strip_prefix(CAPTION_LEAD) else {
                continue;
            };
            let labels: Vec<&str> = list.trim_end_matches('.').split(", ").collect();
            if labels.contains(&anchor.as_str()) {
                presence.push(labels.contains(&target.as_str()));
            }
        }
        Some(mode.aggregate(presence).is_yes())
    }
}

impl Answerer for ScriptedCaptionReader {
    fn respond(&self, request: &AdapterRequest) -> AdapterResponse {
        let text = match Self::decide(&request.question) {
            Some(true) => "Yes",
            Some(false) => "No",
            None => "I am not sure.",
        };
        AdapterResponse::answer(request.id.clone(), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_layout() {
        let p = render_aggregation_prompt(&["a dog", "a cat"], "For the image with dog, is there cat?");
        assert!(p.starts_with("You are a top expert in interpreting image captions"));
        assert!(p.contains("\n\n# Caption (1)\na dog\n# Caption (2)\na cat\n\n"));
        assert!(p.ends_with(
            "please answer the following question: For the image with dog, is there cat?. Please assume there must be at least one image that satisfies the condition. Answer with 'Yes' or 'No' only."
        ));
    }
}
