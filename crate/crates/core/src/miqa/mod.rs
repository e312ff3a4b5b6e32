//! Multi-image instruction data built from single-image QA items.
//!
//! Items are grouped by keyword overlap, then each item receives 2 to 10
//! distractor images drawn from unrelated groups and the image list is
//! shuffled so the relevant image lands anywhere.

mod cluster;
mod inject;
mod keywords;
mod mixture;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

pub use cluster::{cluster_by_keywords, Clusters, QaItem};
pub use inject::{distractor_pool, inject_all, inject_distractors, InjectOptions, MiqaItem};
pub use keywords::{is_stopword, keywords, stem};
pub use mixture::{build_mixture, MixtureStats, Source};

use crate::corpus::Corpus;
use crate::seed::stage_rng;

#[derive(Debug, thiserror::Error)]
pub enum MiqaError {
    #[error("item {item} needs {required} distractors but only {available} unrelated images exist")]
    InsufficientPool {
        item: String,
        required: usize,
        available: usize,
    },
    #[error("source {0} is empty")]
    EmptySource(String),
    #[error("{0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One JSON object per line, newline-terminated.
pub fn to_jsonl(items: &[MiqaItem]) -> String {
    items
        .iter()
        .map(|it| serde_json::to_string(it).expect("plain struct serializes") + "\n")
        .collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<MiqaItem>, MiqaError> {
    parse_lines(text, |it: &MiqaItem| {
        if it.images.len() != it.relevant.len() {
            return Err(format!(
                "{} images but {} relevance bits",
                it.images.len(),
                it.relevant.len()
            ));
        }
        if it.relevant_count() == 0 {
            return Err("no relevant image".into());
        }
        Ok(())
    })
}

/// Single-image items: `{"id","image","question","answer"}` per line.
pub fn qa_from_jsonl(text: &str) -> Result<Vec<QaItem>, MiqaError> {
    let mut items: Vec<QaItem> = parse_lines(text, |_: &QaItem| Ok(()))?;
    for it in &mut items {
        it.refresh_keywords();
    }
    Ok(items)
}

fn parse_lines<T: serde::de::DeserializeOwned>(
    text: &str,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<Vec<T>, MiqaError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: T = serde_json::from_str(l).map_err(|e| MiqaError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            check(&v).map_err(|message| MiqaError::Parse { line: i + 1, message })?;
            Ok(v)
        })
        .collect()
}

pub fn save_jsonl(items: &[MiqaItem], path: impl AsRef<Path>) -> Result<(), MiqaError> {
    Ok(std::fs::write(path, to_jsonl(items))?)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<MiqaItem>, MiqaError> {
    from_jsonl(&std::fs::read_to_string(path)?)
}

pub fn load_qa_jsonl(path: impl AsRef<Path>) -> Result<Vec<QaItem>, MiqaError> {
    qa_from_jsonl(&std::fs::read_to_string(path)?)
}

const TEMPLATES: [&str; 4] = [
    "Is there a {} in the image?",
    "What color is the {}?",
    "Where is the {} located?",
    "How many {} can you see?",
];
const COLORS: [&str; 6] = ["red", "blue", "white", "black", "green", "brown"];
const PLACES: [&str; 4] = ["left", "right", "center", "background"];

/// One templated question per image about one of its labels.
pub fn qa_from_corpus(corpus: &Corpus, seed: u64) -> Vec<QaItem> {
    let mut rng = stage_rng(seed, "miqa/qa");
    corpus
        .images()
        .iter()
        .enumerate()
        .filter_map(|(i, im)| {
            let labels: Vec<&String> = im.object_labels.iter().collect();
            let label = labels.choose(&mut rng)?.to_string();
            let t = rng.gen_range(0..TEMPLATES.len());
            let answer = match t {
                0 => "yes".to_string(),
                1 => COLORS.choose(&mut rng).expect("non-empty").to_string(),
                2 => PLACES.choose(&mut rng).expect("non-empty").to_string(),
                _ => rng.gen_range(1..5).to_string(),
            };
            Some(QaItem::new(
                format!("qa{i:06}"),
                im.image_id.clone(),
                TEMPLATES[t].replace("{}", &label),
                answer,
            ))
        })
        .collect()
}
