//! Needle-in-a-haystack question generation.
//!
//! A question names an *anchor* object that identifies the needle image(s)
//! and a *target* object whose presence decides the yes/no answer. Every
//! other image in the haystack is a distractor that is guaranteed not to
//! contain the anchor.

mod generate;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use generate::depth_index;
pub use generate::{
    assemble_haystack, generate, place_needle, subset_small, GenerateParams, ModeSelection, DEFAULT_SIZE_GRID,
};
pub use validate::{validate_benchmark, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("insufficient distractor pool: need {required} images without the anchor, corpus has {available}")]
    InsufficientDistractors { required: usize, available: usize },
    #[error("haystack size {size} is smaller than the needle count {needles}")]
    SizeTooSmall { size: usize, needles: usize },
    #[error("needle {0} is not in the haystack")]
    NeedleMissing(String),
    #[error("depth fraction {0} outside [0, 1]")]
    DepthOutOfRange(f64),
    #[error("n_questions must be even to balance yes/no answers, got {0}")]
    OddCount(usize),
    #[error("mode {mode} does not allow {needles} needles")]
    NeedleCount { mode: String, needles: usize },
    #[error("could not construct a balanced (anchor, target) pair after {attempts} attempts")]
    Unbalanceable { attempts: usize },
    #[error("subset size {k} exceeds benchmark size {available}")]
    SubsetTooLarge { k: usize, available: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed benchmark JSON at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Question template family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    MultiAll,
    MultiAny,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::MultiAll => "multi_all",
            Mode::MultiAny => "multi_any",
        }
    }

    pub fn is_multi(self) -> bool {
        !matches!(self, Mode::Single)
    }

    pub fn allows_needles(self, n: usize) -> bool {
        match self {
            Mode::Single => n == 1,
            Mode::MultiAll | Mode::MultiAny => (2..=3).contains(&n),
        }
    }

    /// Combine per-needle target presence into the answer.
    pub fn aggregate<I: IntoIterator<Item = bool>>(self, presence: I) -> Answer {
        let mut it = presence.into_iter();
        let yes = match self {
            Mode::Single => it.next().unwrap_or(false),
            Mode::MultiAll => {
                let mut any = false;
                let all = it.all(|p| {
                    any = true;
                    p
                });
                all && any
            }
            Mode::MultiAny => it.any(|p| p),
        };
        Answer::from_bool(yes)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::Single),
            "multi_all" => Ok(Mode::MultiAll),
            "multi_any" => Ok(Mode::MultiAny),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Binary ground-truth answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn is_yes(self) -> bool {
        self == Answer::Yes
    }

    pub fn flip(self) -> Self {
        Answer::from_bool(!self.is_yes())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        }
    }
}

/// Render the question template for a mode.
pub fn render_question(mode: Mode, anchor: &str, target: &str) -> String {
    match mode {
        Mode::Single => format!("For the image with {anchor}, is there {target}?"),
        Mode::MultiAll => {
            format!("For all images with {anchor}, do all of them contain {target}?")
        }
        Mode::MultiAny => {
            format!("For all images with {anchor}, do any of them contain {target}?")
        }
    }
}

/// Inverse of [`render_question`]: recover `(mode, anchor, target)`.
pub fn parse_question(text: &str) -> Option<(Mode, String, String)> {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix("For the image with ") {
        let (anchor, tail) = rest.split_once(", is there ")?;
        let target = tail.strip_suffix('?')?;
        return Some((Mode::Single, anchor.to_string(), target.to_string()));
    }
    let rest = text.strip_prefix("For all images with ")?;
    for (mode, sep) in [
        (Mode::MultiAll, ", do all of them contain "),
        (Mode::MultiAny, ", do any of them contain "),
    ] {
        if let Some((anchor, tail)) = rest.split_once(sep) {
            let target = tail.strip_suffix('?')?;
            return Some((mode, anchor.to_string(), target.to_string()));
        }
    }
    None
}

/// One generated haystack question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSpec {
    #[serde(rename = "id")]
    pub question_id: String,
    pub mode: Mode,
    pub anchor: String,
    pub target: String,
    pub answer: Answer,
    pub question_text: String,
    #[serde(rename = "needles")]
    pub needle_ids: Vec<String>,
    #[serde(rename = "haystack")]
    pub haystack_ids: Vec<String>,
    pub seed: u64,
}

impl QuestionSpec {
    pub fn haystack_size(&self) -> usize {
        self.haystack_ids.len()
    }

    /// Haystack positions of the needles, in `needle_ids` order.
    pub fn needle_positions(&self) -> Vec<Option<usize>> {
        self.needle_ids
            .iter()
            .map(|n| self.haystack_ids.iter().position(|h| h == n))
            .collect()
    }

    pub fn render(&self) -> String {
        render_question(self.mode, &self.anchor, &self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkMetadata {
    pub generator_version: String,
    pub corpus_digest: String,
    pub global_seed: u64,
    pub size_grid: Vec<usize>,
}

/// A full benchmark with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub metadata: BenchmarkMetadata,
    #[serde(rename = "questions")]
    pub specs: Vec<QuestionSpec>,
}

impl BenchmarkSet {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get(&self, question_id: &str) -> Option<&QuestionSpec> {
        self.specs.iter().find(|s| s.question_id == question_id)
    }

    /// Count of (yes, no) answers per mode.
    pub fn balance(&self) -> std::collections::BTreeMap<Mode, (usize, usize)> {
        let mut out = std::collections::BTreeMap::new();
        for s in &self.specs {
            let e: &mut (usize, usize) = out.entry(s.mode).or_default();
            if s.answer.is_yes() {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        out
    }

    /// Concatenate benchmarks generated from the same corpus.
    pub fn merge(parts: Vec<BenchmarkSet>) -> Option<BenchmarkSet> {
        let mut it = parts.into_iter();
        let mut first = it.next()?;
        for p in it {
            first.metadata.size_grid.extend(p.metadata.size_grid);
            first.specs.extend(p.specs);
        }
        first.metadata.size_grid.sort_unstable();
        first.metadata.size_grid.dedup();
        Some(first)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, GenError> {
        serde_json::from_str(text).map_err(|e| GenError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GenError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|source| GenError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GenError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}
