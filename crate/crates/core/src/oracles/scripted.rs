use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;

use super::OracleError;
use crate::adapters::{strip_prompt, AdapterRequest, AdapterResponse, Answerer};
use crate::corpus::Corpus;
use crate::haystack::{parse_question, Answer};
use crate::seed::{derive_seed, rng_from_seed};

/// Probability of a correct answer as a function of needle depth in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Constant(f64),
    /// `base - drop * exp(-(f - center)^2 / width)`
    Dip {
        base: f64,
        drop: f64,
        center: f64,
        width: f64,
    },
}

impl Curve {
    /// 0.9 at the edges, 0.5 at the middle.
    pub fn dip_at_middle() -> Self {
        Curve::Dip {
            base: 0.9,
            drop: 0.4,
            center: 0.5,
            width: 0.02,
        }
    }

    pub fn eval(&self, depth: f64) -> f64 {
        let p = match *self {
            Curve::Constant(p) => p,
            Curve::Dip {
                base,
                drop,
                center,
                width,
            } => base - drop * (-(depth - center).powi(2) / width).exp(),
        };
        p.clamp(0.0, 1.0)
    }
}

/// Behaviour of a [`ScriptedAdapter`].
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    AlwaysYes,
    /// Answers from annotations of the images actually sent.
    GroundTruth,
    /// Correct with probability `curve(depth of first needle)`.
    Positional(Curve),
    /// Correct with probability `p_correct`.
    Noisy(f64),
}

impl std::str::FromStr for Profile {
    type Err = OracleError;

    /// `always_yes`, `ground_truth`, `noisy:<p>`, `positional:dip` or
    /// `positional:const:<p>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || OracleError::UnknownProfile(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let prob = |t: &str| -> Result<f64, OracleError> {
            let p: f64 = t.parse().map_err(|_| unknown())?;
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(unknown())
            }
        };
        match parts.as_slice() {
            ["always_yes"] => Ok(Profile::AlwaysYes),
            ["ground_truth"] => Ok(Profile::GroundTruth),
            ["noisy", p] => Ok(Profile::Noisy(prob(p)?)),
            ["positional", "dip"] => Ok(Profile::Positional(Curve::dip_at_middle())),
            ["positional", "const", p] => Ok(Profile::Positional(Curve::Constant(prob(p)?))),
            _ => Err(unknown()),
        }
    }
}

/// Ground truth for a request, computed from the annotations of the images
/// it carries. Also returns the depth fraction of the first anchor image.
/// With no anchor image present the answer falls back to "no".
pub fn ground_truth_for(corpus: &Corpus, request: &AdapterRequest) -> Option<(Answer, Option<f64>)> {
    let (mode, anchor, target) = parse_question(strip_prompt(&request.question))?;
    let n = request.images.len();
    let mut presence = Vec::new();
    let mut first = None;
    for (i, img) in request.images.iter().enumerate() {
        if corpus.contains_label(&img.id, &anchor) {
            first.get_or_insert(i);
            presence.push(corpus.contains_label(&img.id, &target));
        }
    }
    let depth = first.map(|i| if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 });
    Some((mode.aggregate(presence), depth))
}

/// Deterministic in-process answerer used for desk-scale verification.
/// Randomized profiles draw from a stream seeded by `(seed, request id)`,
/// so results do not depend on scheduling.
#[derive(Clone)]
pub struct ScriptedAdapter {
    pub profile: Profile,
    corpus: Arc<Corpus>,
    seed: u64,
    max_images: Option<usize>,
    stall_on: HashSet<String>,
    stall_for: Duration,
}

impl ScriptedAdapter {
    pub fn new(profile: Profile, corpus: Arc<Corpus>, seed: u64) -> Self {
        Self {
            profile,
            corpus,
            seed,
            max_images: None,
            stall_on: HashSet::new(),
            stall_for: Duration::from_secs(5),
        }
    }

    pub fn with_max_images(mut self, max_images: Option<usize>) -> Self {
        self.max_images = max_images;
        self
    }

    /// Sleep for `duration` before answering the listed question ids.
    pub fn with_stall<I: IntoIterator<Item = String>>(mut self, ids: I, duration: Duration) -> Self {
        self.stall_on = ids.into_iter().collect();
        self.stall_for = duration;
        self
    }

    fn decide(&self, request: &AdapterRequest) -> Option<Answer> {
        if self.profile == Profile::AlwaysYes {
            return Some(Answer::Yes);
        }
        let (truth, depth) = ground_truth_for(&self.corpus, request)?;
        let mut rng = rng_from_seed(derive_seed(self.seed, &request.id));
        let p_correct = match &self.profile {
            Profile::AlwaysYes => unreachable!(),
            Profile::GroundTruth => return Some(truth),
            Profile::Noisy(p) => *p,
            Profile::Positional(curve) => curve.eval(depth.unwrap_or(0.0)),
        };
        Some(if rng.gen_bool(p_correct) { truth } else { truth.flip() })
    }
}

impl Answerer for ScriptedAdapter {
    fn capacity(&self) -> Option<usize> {
        self.max_images
    }

    fn respond(&self, request: &AdapterRequest) -> AdapterResponse {
        if self.stall_on.contains(&request.id) {
            std::thread::sleep(self.stall_for);
        }
        match self.decide(request) {
            Some(Answer::Yes) => AdapterResponse::answer(request.id.clone(), "Yes"),
            Some(Answer::No) => AdapterResponse::answer(request.id.clone(), "No"),
            None => AdapterResponse::answer(request.id.clone(), "I cannot parse this question."),
        }
    }
}

/// Answer with the same text for every request.
pub struct FixedReply(pub String);

impl Answerer for FixedReply {
    fn respond(&self, request: &AdapterRequest) -> AdapterResponse {
        AdapterResponse::answer(request.id.clone(), self.0.clone())
    }
}
