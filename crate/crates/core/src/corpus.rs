//! Object-annotated image corpora and label presence queries.
//!
//! Annotations are closed-world: a label that is not listed for an image is
//! treated as absent. That is what lets the generator certify that a
//! distractor does not contain the anchor object.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate image_id: {0}")]
    DuplicateId(String),
    #[error("empty image_id at position {0}")]
    EmptyId(usize),
}

/// One annotated image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: String,
    pub object_labels: BTreeSet<String>,
    /// Relative file path; empty for feature-only corpora.
    pub source_path: String,
}

impl ImageRecord {
    pub fn new<I, S>(image_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            image_id: image_id.into().trim().to_string(),
            object_labels: labels
                .into_iter()
                .map(|l| l.as_ref().trim().to_string())
                .filter(|l| !l.is_empty())
                .collect(),
            source_path: String::new(),
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn has(&self, label: &str) -> bool {
        self.object_labels.contains(label)
    }
}

/// Label to image inverted index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PresenceIndex {
    /// label -> ascending, duplicate-free image ids
    pub by_label: BTreeMap<String, Vec<String>>,
    /// every label seen in the corpus, sorted
    pub label_universe: Vec<String>,
}

impl PresenceIndex {
    pub fn build(records: &[ImageRecord]) -> Self {
        let mut by_label: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
        for r in records {
            for l in &r.object_labels {
                by_label.entry(l.clone()).or_default().insert(&r.image_id);
            }
        }
        let by_label: BTreeMap<String, Vec<String>> = by_label
            .into_iter()
            .map(|(l, ids)| (l, ids.into_iter().map(str::to_string).collect()))
            .collect();
        let label_universe = by_label.keys().cloned().collect();
        Self {
            by_label,
            label_universe,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    images: Vec<CorpusFileImage>,
}

#[derive(Serialize, Deserialize)]
struct CorpusFileImage {
    id: String,
    labels: Vec<String>,
    #[serde(default)]
    path: String,
}

/// An immutable, indexed corpus. Images are kept sorted by id.
#[derive(Debug, Clone)]
pub struct Corpus {
    images: Vec<ImageRecord>,
    index: PresenceIndex,
    // label -> positions into `images`, ascending
    rows_by_label: BTreeMap<String, Vec<usize>>,
    position: std::collections::HashMap<String, usize>,
}

impl Corpus {
    /// Build a corpus from records. Input order does not matter.
    pub fn from_records(mut records: Vec<ImageRecord>) -> Result<Self, CorpusError> {
        for (i, r) in records.iter().enumerate() {
            if r.image_id.is_empty() {
                return Err(CorpusError::EmptyId(i));
            }
        }
        records.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        if let Some(w) = records.windows(2).find(|w| w[0].image_id == w[1].image_id) {
            return Err(CorpusError::DuplicateId(w[0].image_id.clone()));
        }
        let index = PresenceIndex::build(&records);
        let mut rows_by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            for l in &r.object_labels {
                rows_by_label.entry(l.clone()).or_default().push(i);
            }
        }
        let position = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.clone(), i))
            .collect();
        Ok(Self {
            images: records,
            index,
            rows_by_label,
            position,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CorpusError> {
        let file: CorpusFile = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let records = file
            .images
            .into_iter()
            .map(|img| ImageRecord::new(img.id, img.labels).with_path(img.path))
            .collect();
        Self::from_records(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Canonical JSON rendering (sorted ids and labels).
    pub fn to_json_string(&self) -> String {
        let file = CorpusFile {
            images: self
                .images
                .iter()
                .map(|r| CorpusFileImage {
                    id: r.image_id.clone(),
                    labels: r.object_labels.iter().cloned().collect(),
                    path: r.source_path.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("corpus serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json_string().as_bytes())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn index(&self) -> &PresenceIndex {
        &self.index
    }

    pub fn label_universe(&self) -> &[String] {
        &self.index.label_universe
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.position.get(image_id).map(|&i| &self.images[i])
    }

    pub fn contains_label(&self, image_id: &str, label: &str) -> bool {
        self.get(image_id).is_some_and(|r| r.has(label))
    }

    /// Sorted ids of images annotated with `label`. Unknown labels yield an empty list.
    pub fn images_with(&self, label: &str) -> Vec<String> {
        self.index.by_label.get(label.trim()).cloned().unwrap_or_default()
    }

    /// Sorted ids of images annotated with none of `labels`.
    pub fn images_excluding<S: AsRef<str>>(&self, labels: &[S]) -> Vec<String> {
        self.rows_excluding(labels)
            .into_iter()
            .map(|i| self.images[i].image_id.clone())
            .collect()
    }

    pub(crate) fn rows_with(&self, label: &str) -> &[usize] {
        self.rows_by_label.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn rows_excluding<S: AsRef<str>>(&self, labels: &[S]) -> Vec<usize> {
        let blocked: HashSet<usize> = labels
            .iter()
            .flat_map(|l| self.rows_with(l.as_ref().trim()).iter().copied())
            .collect();
        (0..self.images.len()).filter(|i| !blocked.contains(i)).collect()
    }

    pub(crate) fn record_at(&self, row: usize) -> &ImageRecord {
        &self.images[row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Corpus {
        Corpus::from_json_str(
            r#"{"images":[
                {"id":"C","labels":["cat"],"path":"c.jpg"},
                {"id":"A","labels":["dog"],"path":"a.jpg"},
                {"id":"B","labels":["truck"," dog "],"path":"b.jpg"}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn builds_label_universe() {
        let c = toy();
        assert_eq!(c.label_universe(), ["cat", "dog", "truck"]);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn empty_corpus_is_valid() {
        let c = Corpus::from_json_str(r#"{"images":[]}"#).unwrap();
        assert!(c.is_empty());
        assert!(c.index().by_label.is_empty());
        assert!(c.images_with("dog").is_empty());
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let err = Corpus::from_json_str(r#"{"images":[{"id":"A","labels":["dog"]},{"id":"A","labels":["cat"]}]}"#)
            .unwrap_err();
        assert_eq!(err.to_string(), "duplicate image_id: A");
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = Corpus::from_json_str("{\"images\":[\n{\"id\":\"A\",\n\"labels\":[}\n]}").unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn images_with_queries() {
        let c = toy();
        assert_eq!(c.images_with("dog"), ["A", "B"]);
        assert!(c.images_with("zebra").is_empty());
        assert_eq!(c.images_with("truck"), ["B"]);
    }

    #[test]
    fn images_excluding_queries() {
        let c = toy();
        assert_eq!(c.images_excluding(&["dog"]), ["C"]);
        assert_eq!(c.images_excluding::<&str>(&[]), ["A", "B", "C"]);
        assert!(c.images_excluding(&["dog", "cat"]).is_empty());
    }

    #[test]
    fn labels_are_case_sensitive() {
        let c = Corpus::from_records(vec![ImageRecord::new("x", ["Dog"])]).unwrap();
        assert!(c.images_with("dog").is_empty());
        assert_eq!(c.images_with("Dog"), ["x"]);
    }

    #[test]
    fn load_is_order_independent() {
        let a = Corpus::from_records(vec![ImageRecord::new("1", ["a", "b"]), ImageRecord::new("2", ["b"])]).unwrap();
        let b = Corpus::from_records(vec![ImageRecord::new("2", ["b"]), ImageRecord::new("1", ["b", "a"])]).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.index(), b.index());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn corpus_strategy() -> impl Strategy<Value = Corpus> {
            proptest::collection::btree_map("[a-z]{1,4}", proptest::collection::btree_set("[a-e]", 0..4), 0..30)
                .prop_map(|m| {
                    Corpus::from_records(m.into_iter().map(|(id, labels)| ImageRecord::new(id, labels)).collect())
                        .unwrap()
                })
        }

        proptest! {
            #[test]
            fn with_and_excluding_partition(c in corpus_strategy(), label in "[a-f]") {
                let with: BTreeSet<String> = c.images_with(&label).into_iter().collect();
                let without: BTreeSet<String> = c.images_excluding(&[label.as_str()]).into_iter().collect();
                prop_assert!(with.is_disjoint(&without));
                let all: BTreeSet<String> = c.images().iter().map(|r| r.image_id.clone()).collect();
                let union: BTreeSet<String> = with.union(&without).cloned().collect();
                prop_assert_eq!(union, all);
            }

            #[test]
            fn index_rebuild_is_idempotent(c in corpus_strategy()) {
                let rebuilt = PresenceIndex::build(c.images());
                prop_assert_eq!(&rebuilt, c.index());
                for ids in rebuilt.by_label.values() {
                    prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
                    for id in ids {
                        prop_assert!(c.get(id).is_some());
                    }
                }
            }
        }
    }
}
