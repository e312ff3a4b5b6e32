use std::collections::HashMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{render_question, Answer, BenchmarkMetadata, BenchmarkSet, GenError, Mode, QuestionSpec};
use crate::corpus::Corpus;
use crate::seed::{derive_seed, rng_from_seed, stage_rng, StreamRng};
use crate::GENERATOR_VERSION;

/// Haystack sizes evaluated by default.
pub const DEFAULT_SIZE_GRID: [usize; 11] = [1, 2, 3, 5, 10, 20, 50, 100, 500, 1000, 10000];

// Absorbs representation error so that e.g. 0.29 * 100 lands on 29.
const DEPTH_EPS: f64 = 1e-9;

/// Which templates a generation run draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSelection {
    Single,
    MultiAll,
    MultiAny,
    /// Mix of ALL and ANY pairs; `all_fraction` of the pairs use the ALL template.
    MultiMixed {
        all_fraction: f64,
    },
}

impl ModeSelection {
    fn modes_for(self, pairs: usize) -> Vec<Mode> {
        match self {
            ModeSelection::Single => vec![Mode::Single; pairs],
            ModeSelection::MultiAll => vec![Mode::MultiAll; pairs],
            ModeSelection::MultiAny => vec![Mode::MultiAny; pairs],
            ModeSelection::MultiMixed { all_fraction } => {
                let n_all = (pairs as f64 * all_fraction.clamp(0.0, 1.0)).round() as usize;
                let mut v = vec![Mode::MultiAll; n_all];
                v.resize(pairs, Mode::MultiAny);
                v
            }
        }
    }

    fn check_needles(self, n: usize) -> Result<(), GenError> {
        let mode = match self {
            ModeSelection::Single => Mode::Single,
            ModeSelection::MultiAll => Mode::MultiAll,
            _ => Mode::MultiAny,
        };
        if mode.allows_needles(n) {
            Ok(())
        } else {
            Err(GenError::NeedleCount {
                mode: mode.to_string(),
                needles: n,
            })
        }
    }
}

impl From<Mode> for ModeSelection {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Single => ModeSelection::Single,
            Mode::MultiAll => ModeSelection::MultiAll,
            Mode::MultiAny => ModeSelection::MultiAny,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateParams {
    pub mode: ModeSelection,
    pub n_questions: usize,
    pub haystack_size: usize,
    pub n_needles: usize,
    pub seed: u64,
    /// Attempts allowed per (anchor, target) pair before giving up.
    pub max_attempts: usize,
}

impl GenerateParams {
    pub fn single(n_questions: usize, haystack_size: usize, seed: u64) -> Self {
        Self {
            mode: ModeSelection::Single,
            n_questions,
            haystack_size,
            n_needles: 1,
            seed,
            max_attempts: 1000,
        }
    }

    pub fn multi(mode: ModeSelection, n_questions: usize, haystack_size: usize, n_needles: usize, seed: u64) -> Self {
        Self {
            mode,
            n_questions,
            haystack_size,
            n_needles,
            seed,
            max_attempts: 1000,
        }
    }
}

/// Sample distractors uniformly without replacement from images lacking
/// `anchor` and embed the needles at random positions.
pub fn assemble_haystack(
    corpus: &Corpus,
    needle_ids: &[String],
    size: usize,
    anchor: &str,
    rng: &mut StreamRng,
) -> Result<Vec<String>, GenError> {
    let pool = corpus.rows_excluding(&[anchor]);
    assemble_from_pool(corpus, &pool, needle_ids, size, rng)
}

fn assemble_from_pool(
    corpus: &Corpus,
    pool: &[usize],
    needle_ids: &[String],
    size: usize,
    rng: &mut StreamRng,
) -> Result<Vec<String>, GenError> {
    let m = needle_ids.len();
    if size < m {
        return Err(GenError::SizeTooSmall { size, needles: m });
    }
    let required = size - m;
    if pool.len() < required {
        return Err(GenError::InsufficientDistractors {
            required,
            available: pool.len(),
        });
    }
    let mut distractors = sample(rng, pool.len(), required)
        .into_iter()
        .map(|i| corpus.record_at(pool[i]).image_id.clone());
    let mut slots = sample(rng, size, m).into_vec();
    slots.sort_unstable();
    let mut out = Vec::with_capacity(size);
    let mut next_needle = 0;
    for pos in 0..size {
        if next_needle < m && slots[next_needle] == pos {
            out.push(needle_ids[next_needle].clone());
            next_needle += 1;
        } else {
            out.push(distractors.next().expect("pool sized above"));
        }
    }
    Ok(out)
}

/// Index a needle lands on for a depth fraction in a haystack of `n` images.
pub(crate) fn depth_index(depth_fraction: f64, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let idx = (depth_fraction * (n - 1) as f64 + DEPTH_EPS).floor() as usize;
    idx.min(n - 1)
}

/// Move `needle_id` to index `floor(depth_fraction * (N - 1))`, keeping the
/// relative order of the other images.
pub fn place_needle(haystack_ids: &[String], needle_id: &str, depth_fraction: f64) -> Result<Vec<String>, GenError> {
    if !(0.0..=1.0).contains(&depth_fraction) || depth_fraction.is_nan() {
        return Err(GenError::DepthOutOfRange(depth_fraction));
    }
    let from = haystack_ids
        .iter()
        .position(|h| h == needle_id)
        .ok_or_else(|| GenError::NeedleMissing(needle_id.to_string()))?;
    let mut out = haystack_ids.to_vec();
    let needle = out.remove(from);
    out.insert(depth_index(depth_fraction, haystack_ids.len()), needle);
    Ok(out)
}

struct PairPlan {
    anchor: String,
    target: String,
    yes_needles: Vec<String>,
    no_needles: Vec<String>,
}

fn pick_distinct(pool: &[usize], k: usize, rng: &mut StreamRng) -> Vec<usize> {
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Needles for one answer. `hit` are anchor images with the target, `miss`
/// are anchor images without it; `required_hits`/`required_misses` pin the
/// minimum counts and the rest is filled from all anchor images.
fn draw_needles(
    hit: &[usize],
    miss: &[usize],
    m: usize,
    required_hits: usize,
    required_misses: usize,
    rng: &mut StreamRng,
) -> Option<Vec<usize>> {
    if hit.len() < required_hits || miss.len() < required_misses {
        return None;
    }
    let mut chosen = pick_distinct(hit, required_hits, rng);
    chosen.extend(pick_distinct(miss, required_misses, rng));
    let rest: Vec<usize> = hit
        .iter()
        .chain(miss)
        .copied()
        .filter(|r| !chosen.contains(r))
        .collect();
    let need = m - chosen.len();
    if rest.len() < need {
        return None;
    }
    chosen.extend(pick_distinct(&rest, need, rng));
    chosen.shuffle(rng);
    Some(chosen)
}

fn plan_pair(
    corpus: &Corpus,
    mode: Mode,
    m: usize,
    anchor: &str,
    target: &str,
    rng: &mut StreamRng,
) -> Option<PairPlan> {
    let anchor_rows = corpus.rows_with(anchor);
    let (hit, miss): (Vec<usize>, Vec<usize>) = anchor_rows.iter().partition(|&&r| corpus.record_at(r).has(target));
    // (hits, misses) pinned for the yes and the no instance.
    let ((yh, ym), (nh, nm)) = match mode {
        Mode::Single => ((1, 0), (0, 1)),
        Mode::MultiAll => ((m, 0), (0, 1)),
        Mode::MultiAny => ((1, 0), (0, m)),
    };
    let yes = draw_needles(&hit, &miss, m, yh, ym, rng)?;
    let no = draw_needles(&hit, &miss, m, nh, nm, rng)?;
    let ids =
        |rows: Vec<usize>| -> Vec<String> { rows.into_iter().map(|r| corpus.record_at(r).image_id.clone()).collect() };
    Some(PairPlan {
        anchor: anchor.to_string(),
        target: target.to_string(),
        yes_needles: ids(yes),
        no_needles: ids(no),
    })
}

/// Generate a balanced benchmark. For every sampled (anchor, target) pair one
/// yes-instance and one no-instance are emitted, so answers are balanced
/// exactly within each mode.
pub fn generate(corpus: &Corpus, params: &GenerateParams) -> Result<BenchmarkSet, GenError> {
    if !params.n_questions.is_multiple_of(2) {
        return Err(GenError::OddCount(params.n_questions));
    }
    params.mode.check_needles(params.n_needles)?;
    let m = params.n_needles;
    let size = params.haystack_size;
    if size < m {
        return Err(GenError::SizeTooSmall { size, needles: m });
    }

    let labels = corpus.label_universe();
    let mut pools: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut anchors: Vec<&str> = Vec::new();
    let mut best_pool = 0;
    for l in labels {
        let excl = corpus.rows_excluding(&[l.as_str()]);
        best_pool = best_pool.max(excl.len());
        if corpus.rows_with(l).len() >= m && excl.len() >= size - m {
            anchors.push(l);
            pools.insert(l, excl);
        }
    }
    let pairs = params.n_questions / 2;
    if pairs > 0 && anchors.is_empty() {
        return Err(GenError::InsufficientDistractors {
            required: size - m,
            available: best_pool,
        });
    }

    let mut rng = stage_rng(params.seed, "generate");
    let mut modes = params.mode.modes_for(pairs);
    modes.shuffle(&mut rng);

    let mut specs = Vec::with_capacity(params.n_questions);
    for (p, mode) in modes.into_iter().enumerate() {
        let mut plan = None;
        for _ in 0..params.max_attempts {
            let anchor = anchors[rng.gen_range(0..anchors.len())];
            let target = &labels[rng.gen_range(0..labels.len())];
            if target == anchor {
                continue;
            }
            if let Some(found) = plan_pair(corpus, mode, m, anchor, target, &mut rng) {
                plan = Some(found);
                break;
            }
        }
        let plan = plan.ok_or(GenError::Unbalanceable {
            attempts: params.max_attempts,
        })?;
        let mut instances = [(Answer::Yes, plan.yes_needles), (Answer::No, plan.no_needles)];
        if rng.gen_bool(0.5) {
            instances.swap(0, 1);
        }
        for (answer, needles) in instances {
            let idx = specs.len();
            let q_seed = derive_seed(params.seed, &format!("question/{idx}"));
            let mut q_rng = rng_from_seed(q_seed);
            let haystack = assemble_from_pool(corpus, &pools[plan.anchor.as_str()], &needles, size, &mut q_rng)?;
            specs.push(QuestionSpec {
                question_id: format!("{}-n{}-p{:04}-{}", mode.as_str(), size, p, answer.as_str()),
                mode,
                anchor: plan.anchor.clone(),
                target: plan.target.clone(),
                answer,
                question_text: render_question(mode, &plan.anchor, &plan.target),
                needle_ids: needles,
                haystack_ids: haystack,
                seed: q_seed,
            });
        }
    }

    Ok(BenchmarkSet {
        metadata: BenchmarkMetadata {
            generator_version: GENERATOR_VERSION.to_string(),
            corpus_digest: corpus.digest(),
            global_seed: params.seed,
            size_grid: vec![size],
        },
        specs,
    })
}

/// Stratified subsample keeping exact yes/no balance and mode proportions.
/// The result keeps the original relative order.
pub fn subset_small(benchmark: &BenchmarkSet, k: usize, seed: u64) -> Result<BenchmarkSet, GenError> {
    if !k.is_multiple_of(2) {
        return Err(GenError::OddCount(k));
    }
    if k > benchmark.len() {
        return Err(GenError::SubsetTooLarge {
            k,
            available: benchmark.len(),
        });
    }
    // indices grouped per (mode, answer)
    let mut groups: std::collections::BTreeMap<(Mode, Answer), Vec<usize>> = Default::default();
    for (i, s) in benchmark.specs.iter().enumerate() {
        groups.entry((s.mode, s.answer)).or_default().push(i);
    }
    let modes: Vec<Mode> = {
        let mut v: Vec<Mode> = groups.keys().map(|(m, _)| *m).collect();
        v.dedup();
        v
    };
    // pairs available per mode = min(yes, no)
    let avail: Vec<usize> = modes
        .iter()
        .map(|&m| {
            let y = groups.get(&(m, Answer::Yes)).map_or(0, Vec::len);
            let n = groups.get(&(m, Answer::No)).map_or(0, Vec::len);
            y.min(n)
        })
        .collect();
    let total_pairs: usize = avail.iter().sum();
    let want = k / 2;
    if want > total_pairs {
        return Err(GenError::SubsetTooLarge {
            k,
            available: 2 * total_pairs,
        });
    }
    // largest-remainder allocation of pairs across modes
    let mut alloc: Vec<usize> = Vec::with_capacity(modes.len());
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (i, &a) in avail.iter().enumerate() {
        let exact = if total_pairs == 0 {
            0.0
        } else {
            want as f64 * a as f64 / total_pairs as f64
        };
        alloc.push(exact.floor() as usize);
        remainders.push((exact - exact.floor(), i));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut short = want - alloc.iter().sum::<usize>();
    for (_, i) in remainders.iter().cycle() {
        if short == 0 {
            break;
        }
        if alloc[*i] < avail[*i] {
            alloc[*i] += 1;
            short -= 1;
        }
    }

    let mut rng = stage_rng(seed, "subset-small");
    let mut keep: Vec<usize> = Vec::with_capacity(k);
    for (mi, &mode) in modes.iter().enumerate() {
        for answer in [Answer::Yes, Answer::No] {
            let pool = groups.get(&(mode, answer)).map(Vec::as_slice).unwrap_or(&[]);
            keep.extend(pick_distinct(pool, alloc[mi], &mut rng));
        }
    }
    keep.sort_unstable();
    Ok(BenchmarkSet {
        metadata: benchmark.metadata.clone(),
        specs: keep.into_iter().map(|i| benchmark.specs[i].clone()).collect(),
    })
}
