use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::BenchmarkSet;
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Offending question, or `*` for benchmark-level findings.
    pub question_id: String,
    pub kind: &'static str,
    pub detail: String,
}

/// Findings of [`validate_benchmark`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_questions: usize,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    /// mode -> [yes, no]
    pub balance: BTreeMap<String, [usize; 2]>,
    pub distractor_count: usize,
    pub distractors_with_target: usize,
    pub target_distractor_fraction: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every question against the generating corpus. Ground truth is
/// recomputed by brute force from the annotations of the haystack images that
/// carry the anchor, independently of the recorded needle list.
pub fn validate_benchmark(benchmark: &BenchmarkSet, corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();
    let mut distractor_count = 0;
    let mut distractors_with_target = 0;
    let mut push = |qid: &str, kind: &'static str, detail: String| {
        violations.push(Violation {
            question_id: qid.to_string(),
            kind,
            detail,
        })
    };

    let mut seen_ids = HashSet::new();
    for s in &benchmark.specs {
        let qid = s.question_id.as_str();
        if !seen_ids.insert(qid) {
            push(qid, "duplicate_question_id", String::new());
        }
        if s.anchor == s.target {
            push(qid, "anchor_equals_target", s.anchor.clone());
        }
        if s.question_text != s.render() {
            push(qid, "question_text", format!("expected {:?}", s.render()));
        }
        if !s.mode.allows_needles(s.needle_ids.len()) {
            push(
                qid,
                "needle_count",
                format!("{} needles in mode {}", s.needle_ids.len(), s.mode),
            );
        }
        if s.haystack_ids.is_empty() {
            push(qid, "empty_haystack", String::new());
        }
        let mut hay = HashSet::new();
        for h in &s.haystack_ids {
            if !hay.insert(h.as_str()) {
                push(qid, "duplicate_haystack_image", h.clone());
            }
        }
        let needle_set: HashSet<&str> = s.needle_ids.iter().map(String::as_str).collect();
        if needle_set.len() != s.needle_ids.len() {
            push(qid, "duplicate_needle", String::new());
        }
        for n in &s.needle_ids {
            if !hay.contains(n.as_str()) {
                push(qid, "needle_not_in_haystack", n.clone());
            }
            if !corpus.contains_label(n, &s.anchor) {
                push(qid, "needle_lacks_anchor", n.clone());
            }
        }
        let mut anchored_presence = Vec::new();
        for h in &s.haystack_ids {
            let Some(rec) = corpus.get(h) else {
                push(qid, "unknown_image", h.clone());
                continue;
            };
            if rec.has(&s.anchor) {
                anchored_presence.push(rec.has(&s.target));
            }
            if !needle_set.contains(h.as_str()) {
                distractor_count += 1;
                if rec.has(&s.anchor) {
                    push(qid, "distractor_contains_anchor", h.clone());
                }
                if rec.has(&s.target) {
                    distractors_with_target += 1;
                }
            }
        }
        let truth = s.mode.aggregate(anchored_presence);
        if truth != s.answer {
            push(
                qid,
                "answer_mismatch",
                format!("recorded {}, annotations give {}", s.answer.as_str(), truth.as_str()),
            );
        }
    }

    let mut balance: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for (mode, (y, n)) in benchmark.balance() {
        balance.insert(mode.as_str().to_string(), [y, n]);
        if y != n {
            push("*", "unbalanced", format!("mode {}: {y} yes vs {n} no", mode.as_str()));
        }
    }

    let mut warnings = Vec::new();
    if distractor_count > 0 && distractors_with_target == 0 {
        warnings.push("no meaningful distractors: no distractor contains a target object".to_string());
    }
    let target_distractor_fraction = if distractor_count == 0 {
        0.0
    } else {
        distractors_with_target as f64 / distractor_count as f64
    };
    ValidationReport {
        n_questions: benchmark.len(),
        violations,
        warnings,
        balance,
        distractor_count,
        distractors_with_target,
        target_distractor_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ImageRecord;
    use crate::haystack::{generate, GenerateParams};
    use crate::synth::{synthetic_corpus, SynthCorpusParams};

    #[test]
    fn fresh_set_is_clean() {
        let c = synthetic_corpus(&SynthCorpusParams {
            n_images: 300,
            n_labels: 10,
            ..Default::default()
        });
        let b = generate(&c, &GenerateParams::single(20, 20, 4)).unwrap();
        let r = validate_benchmark(&b, &c);
        assert!(r.is_clean(), "{:?}", r.violations);
        assert!(r.target_distractor_fraction > 0.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn injected_needle_without_anchor_is_reported() {
        let c = synthetic_corpus(&SynthCorpusParams {
            n_images: 300,
            n_labels: 10,
            ..Default::default()
        });
        let mut b = generate(&c, &GenerateParams::single(4, 5, 4)).unwrap();
        let spec = &mut b.specs[1];
        let anchor = spec.anchor.clone();
        let bad = spec
            .haystack_ids
            .iter()
            .find(|h| !c.contains_label(h, &anchor))
            .unwrap()
            .clone();
        spec.needle_ids = vec![bad];
        let r = validate_benchmark(&b, &c);
        let lacks: Vec<_> = r
            .violations
            .iter()
            .filter(|v| v.kind == "needle_lacks_anchor")
            .collect();
        assert_eq!(lacks.len(), 1);
        assert_eq!(lacks[0].question_id, b.specs[1].question_id);
    }

    #[test]
    fn warns_without_target_bearing_distractors() {
        // targets never co-occur with distractors
        let mut recs = vec![ImageRecord::new("n1", ["dog", "cat"]), ImageRecord::new("n2", ["dog"])];
        for i in 0..6 {
            recs.push(ImageRecord::new(format!("d{i}"), ["bus"]));
        }
        let c = Corpus::from_records(recs).unwrap();
        let mut p = GenerateParams::single(2, 4, 1);
        p.max_attempts = 10_000;
        let b = generate(&c, &p).unwrap();
        // oracle: scan annotations directly
        let any = b.specs.iter().any(|s| {
            s.haystack_ids
                .iter()
                .filter(|h| !s.needle_ids.contains(h))
                .any(|h| c.contains_label(h, &s.target))
        });
        assert!(!any);
        let r = validate_benchmark(&b, &c);
        assert!(r.is_clean());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].starts_with("no meaningful distractors"));
    }
}
