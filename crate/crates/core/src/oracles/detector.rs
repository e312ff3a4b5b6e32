use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::adapters::{Normalized, Transcript, TranscriptEntry};
use crate::corpus::Corpus;
use crate::haystack::{Answer, BenchmarkSet, Mode, QuestionSpec};
use crate::seed::derive_seed;

pub const DEFAULT_TARGET_THRESHOLD: f64 = 0.5;
pub const DEFAULT_ANCHOR_THRESHOLD: f64 = 0.5;

/// Per (image, label) detection confidences; missing entries are 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionTable {
    conf: HashMap<(String, String), f64>,
}

#[derive(Serialize, Deserialize)]
struct DetectionFile {
    detections: Vec<DetectionRow>,
}

#[derive(Serialize, Deserialize)]
struct DetectionRow {
    image: String,
    label: String,
    conf: f64,
}

impl DetectionTable {
    pub fn insert(&mut self, image: &str, label: &str, conf: f64) {
        self.conf
            .insert((image.to_string(), label.to_string()), conf.clamp(0.0, 1.0));
    }

    pub fn confidence(&self, image: &str, label: &str) -> f64 {
        self.conf
            .get(&(image.to_string(), label.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Confidence 1.0 wherever the corpus annotates a label.
    pub fn perfect(corpus: &Corpus) -> Self {
        Self::degraded(corpus, 1.0, 0)
    }

    /// Annotated labels are detected (confidence 1.0) with probability `tpr`;
    /// no false positives. Each (image, label) draws one fixed uniform from
    /// `seed`, so lowering `tpr` only removes detections.
    pub fn degraded(corpus: &Corpus, tpr: f64, seed: u64) -> Self {
        let mut t = Self::default();
        for r in corpus.images() {
            for l in &r.object_labels {
                let u = (derive_seed(seed, &format!("{}\u{0}{}", r.image_id, l)) >> 11) as f64 / (1u64 << 53) as f64;
                if u < tpr {
                    t.insert(&r.image_id, l, 1.0);
                }
            }
        }
        t
    }

    pub fn from_json_str(text: &str) -> Result<Self, OracleError> {
        let f: DetectionFile = serde_json::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
        let mut t = Self::default();
        for row in f.detections {
            t.insert(&row.image, &row.label, row.conf);
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| OracleError::Parse(e.to_string()))?;
        Self::from_json_str(&text)
    }

    /// Rows sorted by (image, label).
    pub fn to_json_string(&self) -> String {
        let mut rows: Vec<DetectionRow> = self
            .conf
            .iter()
            .map(|((image, label), conf)| DetectionRow {
                image: image.clone(),
                label: label.clone(),
                conf: *conf,
            })
            .collect();
        rows.sort_by(|a, b| (&a.image, &a.label).cmp(&(&b.image, &b.label)));
        serde_json::to_string(&DetectionFile { detections: rows }).expect("detections serialize")
    }
}

/// Single-needle oracle: take the image with the highest anchor confidence
/// (earliest wins ties) and test the target on it.
pub fn detector_oracle_single(
    detections: &DetectionTable,
    spec: &QuestionSpec,
    target_threshold: f64,
) -> Result<Answer, OracleError> {
    if spec.mode != Mode::Single {
        return Err(OracleError::WrongMode(spec.mode));
    }
    let mut best: Option<(&str, f64)> = None;
    for id in &spec.haystack_ids {
        let c = detections.confidence(id, &spec.anchor);
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((id, c));
        }
    }
    let (image, _) = best.ok_or(OracleError::EmptyHaystack)?;
    Ok(Answer::from_bool(
        detections.confidence(image, &spec.target) >= target_threshold,
    ))
}

/// Multi-needle oracle: candidates are images whose anchor confidence clears
/// `anchor_threshold`; ALL/ANY over target detections. No candidates -> no.
pub fn detector_oracle_multi(
    detections: &DetectionTable,
    spec: &QuestionSpec,
    anchor_threshold: f64,
    target_threshold: f64,
) -> Result<Answer, OracleError> {
    if !spec.mode.is_multi() {
        return Err(OracleError::WrongMode(spec.mode));
    }
    let presence: Vec<bool> = spec
        .haystack_ids
        .iter()
        .filter(|id| detections.confidence(id, &spec.anchor) >= anchor_threshold)
        .map(|id| detections.confidence(id, &spec.target) >= target_threshold)
        .collect();
    Ok(spec.mode.aggregate(presence))
}

/// Run the matching oracle over every question and record the answers as a transcript.
pub fn run_detector_oracle(
    benchmark: &BenchmarkSet,
    detections: &DetectionTable,
    anchor_threshold: f64,
    target_threshold: f64,
) -> Result<Transcript, OracleError> {
    let mut entries = Vec::with_capacity(benchmark.len());
    for spec in &benchmark.specs {
        let answer = if spec.mode.is_multi() {
            detector_oracle_multi(detections, spec, anchor_threshold, target_threshold)?
        } else {
            detector_oracle_single(detections, spec, target_threshold)?
        };
        entries.push(TranscriptEntry {
            question_id: spec.question_id.clone(),
            raw_text: answer.as_str().to_string(),
            normalized: if answer.is_yes() {
                Normalized::Yes
            } else {
                Normalized::No
            },
            latency_ms: 0.0,
            timed_out: false,
            unevaluated: false,
            error: None,
        });
    }
    entries.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    Ok(Transcript {
        capabilities: None,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ImageRecord;
    use crate::haystack::render_question;

    fn spec(mode: Mode, haystack: &[&str], needles: &[&str]) -> QuestionSpec {
        QuestionSpec {
            question_id: "q".into(),
            mode,
            anchor: "dog".into(),
            target: "cat".into(),
            answer: Answer::Yes,
            question_text: render_question(mode, "dog", "cat"),
            needle_ids: needles.iter().map(|s| s.to_string()).collect(),
            haystack_ids: haystack.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }

    fn corpus() -> Corpus {
        Corpus::from_records(vec![
            ImageRecord::new("n1", ["dog", "cat"]),
            ImageRecord::new("n2", ["dog"]),
            ImageRecord::new("d1", ["cat"]),
            ImageRecord::new("d2", ["bus"]),
        ])
        .unwrap()
    }

    #[test]
    fn single_with_perfect_detections() {
        let det = DetectionTable::perfect(&corpus());
        let s = spec(Mode::Single, &["d1", "n1", "d2"], &["n1"]);
        assert_eq!(detector_oracle_single(&det, &s, 0.5).unwrap(), Answer::Yes);
        let s = spec(Mode::Single, &["d1", "d2", "n2"], &["n2"]);
        assert_eq!(detector_oracle_single(&det, &s, 0.5).unwrap(), Answer::No);
    }

    #[test]
    fn single_tie_prefers_earliest() {
        let mut det = DetectionTable::default();
        det.insert("a", "dog", 0.9);
        det.insert("b", "dog", 0.9);
        det.insert("a", "cat", 1.0);
        let s = spec(Mode::Single, &["a", "b"], &["a"]);
        assert_eq!(detector_oracle_single(&det, &s, 0.5).unwrap(), Answer::Yes);
        let s = spec(Mode::Single, &["b", "a"], &["b"]);
        assert_eq!(detector_oracle_single(&det, &s, 0.5).unwrap(), Answer::No);
    }

    #[test]
    fn single_errors() {
        let det = DetectionTable::default();
        assert!(matches!(
            detector_oracle_single(&det, &spec(Mode::Single, &[], &[]), 0.5),
            Err(OracleError::EmptyHaystack)
        ));
        assert!(matches!(
            detector_oracle_single(&det, &spec(Mode::MultiAny, &["a"], &[]), 0.5),
            Err(OracleError::WrongMode(_))
        ));
    }

    #[test]
    fn multi_control_flow() {
        let det = DetectionTable::perfect(&corpus());
        let s = spec(Mode::MultiAny, &["n1", "d2", "n2"], &["n1", "n2"]);
        assert_eq!(detector_oracle_multi(&det, &s, 0.5, 0.5).unwrap(), Answer::Yes);
        let s = spec(Mode::MultiAll, &["n1", "d2", "n2"], &["n1", "n2"]);
        assert_eq!(detector_oracle_multi(&det, &s, 0.5, 0.5).unwrap(), Answer::No);
        let mut weak = DetectionTable::default();
        weak.insert("n1", "dog", 0.3);
        weak.insert("n1", "cat", 1.0);
        let s = spec(Mode::MultiAny, &["n1", "d2"], &["n1"]);
        assert_eq!(detector_oracle_multi(&weak, &s, 0.5, 0.5).unwrap(), Answer::No);
    }

    #[test]
    fn degraded_is_nested() {
        let c = corpus();
        let hi = DetectionTable::degraded(&c, 0.8, 3);
        let lo = DetectionTable::degraded(&c, 0.4, 3);
        for (img, lab) in lo.conf.keys() {
            assert_eq!(hi.confidence(img, lab), 1.0);
        }
    }

    #[test]
    fn json_roundtrip() {
        let det = DetectionTable::perfect(&corpus());
        let text = det.to_json_string();
        assert!(text.starts_with(r#"{"detections":[{"image":"d1","label":"cat","conf":1.0}"#));
        assert_eq!(DetectionTable::from_json_str(&text).unwrap(), det);
    }
}
