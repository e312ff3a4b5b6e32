//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use vhaystack::adapters::{dispatch, DispatchOptions, Endpoint};
use vhaystack::haystack::{
    generate, validate_benchmark, BenchmarkSet, GenerateParams, ModeSelection, DEFAULT_SIZE_GRID,
};
use vhaystack::metrics::{bootstrap, positional_bias_run, score, BiasParams, DEFAULT_DEPTHS};
use vhaystack::miqa::{cluster_by_keywords, inject_all, qa_from_corpus, InjectOptions};
use vhaystack::neural::gradcheck::{Gelu, Sigmoid, Softmax};
use vhaystack::neural::params::gaussian_init;
use vhaystack::neural::{grad_check, Attention, Block, LayerNorm, Linear, Mat, Mlp, Module, ParamStore};
use vhaystack::oracles::{run_detector_oracle, Curve, DetectionTable, Profile, ScriptedAdapter};
use vhaystack::retriever::model::{HeadModule, RetrieverModule};
use vhaystack::retriever::{
    filter, filter_then_read, random_cap_read, synth_features, train, weighted_bce, ModelConfig, Retriever,
    RetrieverConfig, SynthFeatureParams, TrainOptions,
};
use vhaystack::seed::rng_from_seed;
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};
use vhaystack::Corpus;

const CORPUS_SIZE: usize = 20_000;
const LARGE_GEN_BUDGET: Duration = Duration::from_secs(60);
const NOISY_N: usize = 1000;
const SIGMAS: f64 = 3.0;
const DETECTOR_TPRS: [f64; 4] = [1.0, 0.9, 0.8, 0.7];
const DETECTOR_SIZES: [usize; 3] = [1, 10, 100];
const DETECTOR_SEEDS: u64 = 5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
const GRAD_DRAWS_PER_MODULE: usize = 12;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const PERM_TOL: f64 = 1e-9;
const BCE_TOL: f64 = 1e-12;
const TOY_MIN_RECALL: f64 = 0.95;
const TOY_MIN_ACCURACY: f64 = 0.95;
const TOY_MAX_RANDOM: f64 = 0.6;
const TOY_BUDGET: Duration = Duration::from_secs(300);
const BIAS_SIZES: [usize; 3] = [5, 10, 20];
const BIAS_PER_CELL: usize = 400;
const BOOT_TARGET: f64 = 0.0158;
const BOOT_TOL: f64 = 0.003;
const MIQA_ITEMS: usize = 1000;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn in_process(profile: Profile, corpus: &Arc<Corpus>, seed: u64) -> Endpoint {
    Endpoint::in_process(ScriptedAdapter::new(profile, corpus.clone(), seed))
}

fn accuracy(bench: &BenchmarkSet, corpus: &Arc<Corpus>, ep: &Endpoint) -> f64 {
    let t = dispatch(bench, Some(corpus), ep, &DispatchOptions::default()).unwrap();
    score(&t, bench).unwrap().accuracy
}

fn big_corpus() -> Arc<Corpus> {
    Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: CORPUS_SIZE,
        ..SynthCorpusParams::default()
    }))
}

fn benchmark_validity(corpus: &Arc<Corpus>) -> Outcome {
    let mut bad = Vec::new();
    let mut large_secs = 0.0;
    for &size in &DEFAULT_SIZE_GRID {
        let n = if size >= 10_000 { 100 } else { 1000 };
        let start = Instant::now();
        let bench = generate(corpus, &GenerateParams::single(n, size, size as u64)).unwrap();
        if size == 10_000 {
            large_secs = start.elapsed().as_secs_f64();
        }
        let report = validate_benchmark(&bench, corpus);
        let [yes, no] = report.balance["single"];
        if !report.is_clean() || yes != no || yes + no != n {
            bad.push(format!(
                "size {size}: {} violations, {yes}/{no}",
                report.violations.len()
            ));
        }
    }
    check(
        bad.is_empty() && large_secs < LARGE_GEN_BUDGET.as_secs_f64(),
        format!("11 sizes clean and balanced {bad:?}; size-10000 generation {large_secs:.2}s"),
    )
}

fn adapters(corpus: &Arc<Corpus>) -> Outcome {
    let gt = in_process(Profile::GroundTruth, corpus, 0);
    let mut worst: f64 = 1.0;
    let mut runs = 0;
    for &size in &DEFAULT_SIZE_GRID {
        let n = if size >= 10_000 { 20 } else { 100 };
        let mut params = vec![GenerateParams::single(n, size, 1)];
        if size >= 2 {
            params.push(GenerateParams::multi(ModeSelection::MultiAll, n, size, 2, 2));
            params.push(GenerateParams::multi(ModeSelection::MultiAny, n, size, 2, 3));
        }
        for p in params {
            let bench = generate(corpus, &p).unwrap();
            worst = worst.min(accuracy(&bench, corpus, &gt));
            runs += 1;
        }
    }
    let bench = generate(corpus, &GenerateParams::single(NOISY_N, 10, 9)).unwrap();
    let noisy = accuracy(&bench, corpus, &in_process(Profile::Noisy(0.5), corpus, 4));
    let band = SIGMAS * (0.25 / NOISY_N as f64).sqrt();
    check(
        worst == 1.0 && (noisy - 0.5).abs() <= band,
        format!("ground truth min {worst:.4} over {runs} size/mode runs; noisy(0.5) {noisy:.4} (band ±{band:.4})"),
    )
}

fn detector_oracle() -> Outcome {
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: 2000,
        seed: 5,
        ..SynthCorpusParams::default()
    }));
    let perfect = DetectionTable::perfect(&corpus);
    let mut exact = true;
    for p in [
        GenerateParams::single(200, 20, 1),
        GenerateParams::multi(ModeSelection::MultiAll, 200, 20, 3, 2),
        GenerateParams::multi(ModeSelection::MultiAny, 200, 20, 2, 3),
    ] {
        let bench = generate(&corpus, &p).unwrap();
        let t = run_detector_oracle(&bench, &perfect, 0.5, 0.5).unwrap();
        exact &= score(&t, &bench).unwrap().accuracy == 1.0;
    }
    let mut monotone = true;
    let mut rows = Vec::new();
    for &size in &DETECTOR_SIZES {
        let mut means = Vec::new();
        for &tpr in &DETECTOR_TPRS {
            let mut acc = 0.0;
            for seed in 0..DETECTOR_SEEDS {
                let bench = generate(&corpus, &GenerateParams::single(200, size, 100 + seed)).unwrap();
                let table = DetectionTable::degraded(&corpus, tpr, seed);
                let t = run_detector_oracle(&bench, &table, 0.5, 0.5).unwrap();
                acc += score(&t, &bench).unwrap().accuracy;
            }
            means.push(acc / DETECTOR_SEEDS as f64);
        }
        monotone &= means.windows(2).all(|w| w[1] <= w[0]);
        let cells: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        rows.push(format!("N={size}: {}", cells.join("/")));
    }
    check(
        exact && monotone,
        format!("perfect detections exact={exact}; TPR 1.0..0.7 {}", rows.join(", ")),
    )
}

fn draw<M: Module>(m: &M, ps: &mut ParamStore, inputs: &[Mat], rows: usize, cols: usize, rng: &mut impl Rng) -> f64 {
    let coeff = gaussian_init(rng, rows, cols);
    grad_check(m, ps, inputs, &coeff, GRAD_EPS).unwrap().max_rel_error
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(2024);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut draws = 0;
    for _ in 0..GRAD_DRAWS_PER_MODULE {
        let d = *[2usize, 4, 6].choose(&mut rng).unwrap();
        let rows = rng.gen_range(1..=4);
        let kv_rows = rng.gen_range(1..=5);
        let x = gaussian_init(&mut rng, rows, d);
        let kv = gaussian_init(&mut rng, kv_rows, d);
        let heads = if rng.gen_bool(0.5) { 1 } else { 2 };
        let mut errs: Vec<(&str, f64)> = Vec::new();

        let mut ps = ParamStore::new();
        let lin = Linear::new(&mut ps, "lin", d, d + 1, &mut rng);
        errs.push((
            "linear",
            draw(&lin, &mut ps, std::slice::from_ref(&x), rows, d + 1, &mut rng),
        ));
        let mut ps = ParamStore::new();
        let ln = LayerNorm::new(&mut ps, "ln", d);
        for id in ps.ids().collect::<Vec<_>>() {
            *ps.get_mut(id) = gaussian_init(&mut rng, 1, d);
        }
        errs.push((
            "layernorm",
            draw(&ln, &mut ps, std::slice::from_ref(&x), rows, d, &mut rng),
        ));
        let mut ps = ParamStore::new();
        errs.push((
            "gelu",
            draw(&Gelu, &mut ps, std::slice::from_ref(&x), rows, d, &mut rng),
        ));
        errs.push((
            "sigmoid",
            draw(&Sigmoid, &mut ps, std::slice::from_ref(&x), rows, d, &mut rng),
        ));
        errs.push((
            "softmax",
            draw(&Softmax, &mut ps, std::slice::from_ref(&x), rows, d, &mut rng),
        ));
        let mlp = Mlp::new(&mut ps, "mlp", d, 2 * d, d, &mut rng);
        errs.push(("mlp", draw(&mlp, &mut ps, std::slice::from_ref(&x), rows, d, &mut rng)));
        let mut ps = ParamStore::new();
        let attn = Attention::new(&mut ps, "attn", d, heads, &mut rng);
        errs.push((
            "attention",
            draw(&attn, &mut ps, &[x.clone(), kv.clone()], rows, d, &mut rng),
        ));
        let mut ps = ParamStore::new();
        let block = Block::new(&mut ps, "block", d, heads, 2, &mut rng);
        errs.push((
            "block",
            draw(&block, &mut ps, &[x.clone(), kv.clone()], rows, d, &mut rng),
        ));

        let mut mc = ModelConfig::new(d);
        mc.k = rng.gen_range(1..=3);
        mc.compressor_blocks = 1;
        mc.head_blocks = rng.gen_range(1..=2);
        mc.heads = heads;
        let r = Retriever::new(mc.clone(), rng.gen());
        let query = gaussian_init(&mut rng, 1, d);
        let tokens = gaussian_init(&mut rng, mc.k, d);
        let mut ps = r.params.clone();
        errs.push((
            "relevance_head",
            draw(&HeadModule(&r), &mut ps, &[query.clone(), tokens], 1, 1, &mut rng),
        ));
        let patches = gaussian_init(&mut rng, kv_rows, d);
        let mut ps = r.params.clone();
        errs.push((
            "retriever",
            draw(&RetrieverModule(&r), &mut ps, &[patches, query], 1, 1, &mut rng),
        ));

        for (name, e) in errs {
            let w = worst.entry(name).or_insert(0.0);
            *w = w.max(e);
            draws += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.values().cloned().fold(0.0, f64::max);
    check(
        max < GRAD_TOL && draws >= 100 && secs < GRAD_BUDGET.as_secs_f64(),
        format!(
            "{draws} draws over {} modules, max rel error {max:.2e}, {secs:.1}s",
            worst.len()
        ),
    )
}

fn compression() -> Outcome {
    let r = Retriever::new(ModelConfig::new(16), 7);
    let mut rng = rng_from_seed(8);
    let mut shapes = Vec::new();
    let mut worst: f64 = 0.0;
    for t in [1usize, 32, 576] {
        let patches = gaussian_init(&mut rng, t, 16);
        let out = r.compress(&patches).unwrap();
        shapes.push(out.shape());
        let mut perm: Vec<usize> = (0..t).collect();
        perm.shuffle(&mut rng);
        worst = worst.max(out.max_abs_diff(&r.compress(&patches.permute_rows(&perm)).unwrap()));
    }
    check(
        shapes.iter().all(|&s| s == (32, 16)) && worst < PERM_TOL,
        format!("T=1/32/576 -> {shapes:?}; permutation max abs diff {worst:.1e}"),
    )
}

/// Exhaustive subset search: the chosen set must be the
/// `min(cap, #above)` above-threshold indices whose scores, listed by
/// rank, are lexicographically best. Rank is counted pairwise.
fn brute_force(scores: &[f64], threshold: f64, cap: Option<usize>) -> Vec<usize> {
    let n = scores.len();
    let above = scores.iter().filter(|&&s| s >= threshold).count();
    let (eligible, want): (Box<dyn Fn(usize) -> bool>, usize) = if above == 0 {
        (Box::new(|_| true), 1)
    } else {
        (
            Box::new(|i| scores[i] >= threshold),
            cap.map_or(above, |c| c.min(above)),
        )
    };
    let beats = |a: usize, b: usize| scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != want || !(0..n).all(|i| mask & (1 << i) == 0 || eligible(i)) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let mut ordered = vec![0; want];
        for &i in &members {
            ordered[members.iter().filter(|&&j| beats(j, i)).count()] = i;
        }
        let better = match &best {
            None => true,
            Some(b) => ordered
                .iter()
                .zip(b)
                .find(|(x, y)| x != y)
                .is_some_and(|(&x, &y)| beats(x, y)),
        };
        if better {
            best = Some(ordered);
        }
    }
    best.expect("some subset qualifies")
}

fn compare(scores: &[f64], threshold: f64, cap: Option<usize>) -> bool {
    let cfg = RetrieverConfig {
        threshold,
        top_k_cap: cap,
        ..RetrieverConfig::default()
    };
    filter(scores, &cfg).unwrap() == brute_force(scores, threshold, cap)
}

/// Every vector over `levels` that uses each level at least once.
fn surjections(n: usize, levels: &[f64], out: &mut Vec<f64>, used: &mut Vec<usize>, f: &mut impl FnMut(&[f64])) {
    let missing = used.iter().filter(|&&u| u == 0).count();
    if out.len() == n {
        if missing == 0 {
            f(out);
        }
        return;
    }
    if n - out.len() < missing {
        return;
    }
    for (l, &v) in levels.iter().enumerate() {
        out.push(v);
        used[l] += 1;
        surjections(n, levels, out, used, f);
        used[l] -= 1;
        out.pop();
    }
}

fn filter_equivalence() -> Outcome {
    let lattice: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let mut full = 0usize;
    let mut mismatches = 0usize;
    for n in 1..=5usize {
        let total = 11usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let x = lattice[c % 11];
                    c /= 11;
                    x
                })
                .collect();
            for theta in [0.0, 0.3, 0.5, 1.0] {
                for cap in [None, Some(1), Some(2), Some(3)] {
                    full += 1;
                    mismatches += usize::from(!compare(&v, theta, cap));
                }
            }
        }
    }
    // Lengths 6..=8: one representative per order type of (scores, 0.5).
    let mut reps = 0usize;
    for n in 6..=8usize {
        for below in 0..=5usize {
            for above in 0..=6usize {
                if below + above == 0 || below + above > n {
                    continue;
                }
                let levels: Vec<f64> = (0..below)
                    .map(|j| lattice[4 - j])
                    .chain((0..above).map(|j| lattice[5 + j]))
                    .collect();
                let mut used = vec![0; levels.len()];
                surjections(n, &levels, &mut Vec::new(), &mut used, &mut |v| {
                    for cap in [None, Some(2)] {
                        reps += 1;
                        mismatches += usize::from(!compare(v, 0.5, cap));
                    }
                });
            }
        }
    }
    check(
        mismatches == 0,
        format!(
            "{full} full-lattice cases (n<=5) and {reps} order-type representatives (n=6..8), {mismatches} mismatches"
        ),
    )
}

fn loss_and_weighting() -> Outcome {
    let closed = (weighted_bce(0.5, 1, 5.0).loss - 5.0 * std::f64::consts::LN_2).abs();
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 200,
        n_labels: 10,
        min_labels: 1,
        max_labels: 1,
        seed: 1,
    });
    let features = synth_features(&corpus, &SynthFeatureParams::new(16, 16, 0.1, 2)).unwrap();
    let recall = |w: f64, seed: u64| {
        let cfg = RetrieverConfig {
            positive_weight: w,
            ..RetrieverConfig::default()
        };
        let opts = TrainOptions {
            steps: 300,
            seed,
            eval_every: 0,
            ..TrainOptions::default()
        };
        train(&features, ModelConfig::new(16), &cfg, &opts)
            .unwrap()
            .log
            .last()
            .unwrap()
            .recall
    };
    let (mut hi, mut lo) = (0.0, 0.0);
    for seed in 0..5 {
        hi += recall(5.0, seed) / 5.0;
        lo += recall(1.0, seed) / 5.0;
    }
    check(
        closed < BCE_TOL && hi > lo,
        format!("|bce(0.5,1,5) - 5 ln 2| = {closed:.1e}; mean recall@0.5 w_pos=5 {hi:.3} vs w_pos=1 {lo:.3}"),
    )
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: 200,
        n_labels: 8,
        min_labels: 1,
        max_labels: 2,
        seed: 1,
    }));
    let features = synth_features(&corpus, &SynthFeatureParams::new(16, 16, 0.1, 2)).unwrap();
    let config = RetrieverConfig::default();
    let opts = TrainOptions {
        steps: 2000,
        seed: 3,
        eval_every: 0,
        ..TrainOptions::default()
    };
    let out = train(&features, ModelConfig::new(16), &config, &opts).unwrap();
    let recall = out.log.last().unwrap().recall;
    let bench = generate(&corpus, &GenerateParams::single(100, 100, 4)).unwrap();
    let reader = ScriptedAdapter::new(Profile::GroundTruth, corpus.clone(), 0);
    let filtered = filter_then_read(&out.model, &features, &bench, &corpus, &config, &reader).unwrap();
    let unfiltered = random_cap_read(&bench, &corpus, 10, 5, &reader);
    let acc = score(&filtered.transcript, &bench).unwrap().accuracy;
    let random = score(&unfiltered.transcript, &bench).unwrap().accuracy;
    let secs = start.elapsed().as_secs_f64();
    check(
        recall >= TOY_MIN_RECALL
            && acc >= TOY_MIN_ACCURACY
            && random <= TOY_MAX_RANDOM
            && secs < TOY_BUDGET.as_secs_f64(),
        format!("recall@0.5 {recall:.3}; filter-then-read {acc:.3} vs random-10 {random:.3}; {secs:.1}s"),
    )
}

fn positional_bias(corpus: &Arc<Corpus>) -> Outcome {
    let curve = Curve::dip_at_middle();
    let params = BiasParams {
        generator: GenerateParams::single(BIAS_PER_CELL, 0, 21),
        resamples: 200,
        dispatch: DispatchOptions::default(),
    };
    let ep = in_process(Profile::Positional(curve.clone()), corpus, 6);
    let grid = positional_bias_run(corpus, &params, &DEFAULT_DEPTHS, &BIAS_SIZES, &ep).unwrap();
    let mut worst_z: f64 = 0.0;
    for cell in &grid.cells {
        let p = curve.eval(cell.realized_depth());
        let sigma = (p * (1.0 - p) / cell.n as f64).sqrt();
        worst_z = worst_z.max((cell.accuracy - p).abs() / sigma);
    }
    let mid = grid.row(20).unwrap()[2].accuracy;
    check(
        worst_z <= SIGMAS && grid.cells.iter().all(|c| c.evaluated),
        format!(
            "{} cells, worst |z| {worst_z:.2}; N=20 middle accuracy {mid:.3}",
            grid.cells.len()
        ),
    )
}

fn bootstrap_std() -> Outcome {
    let values: Vec<f64> = (0..1000).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
    let stats = bootstrap(&values, 1000, 17).unwrap();
    let closed = (0.25f64 / 1000.0).sqrt();
    check(
        (stats.std - BOOT_TARGET).abs() <= BOOT_TOL,
        format!("bootstrap std {:.5}, binomial {closed:.5}", stats.std),
    )
}

fn miqa_builder() -> Outcome {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: MIQA_ITEMS,
        seed: 12,
        ..SynthCorpusParams::default()
    });
    let qa = qa_from_corpus(&corpus, 3);
    let clusters = cluster_by_keywords(&qa, 1);
    let items = inject_all(&qa, &clusters, InjectOptions::default(), 5).unwrap();
    let counts_ok = items.len() == MIQA_ITEMS && items.iter().all(|i| (2..=10).contains(&i.distractor_count()));

    let mut image_clusters: HashMap<&str, HashSet<usize>> = HashMap::new();
    for (i, q) in qa.iter().enumerate() {
        image_clusters
            .entry(q.image.as_str())
            .or_default()
            .insert(clusters.assignment[i]);
    }
    let mut same_cluster = 0;
    for (i, item) in items.iter().enumerate() {
        for (img, &rel) in item.images.iter().zip(&item.relevant) {
            if !rel
                && image_clusters
                    .get(img.as_str())
                    .is_some_and(|c| c.contains(&clusters.assignment[i]))
            {
                same_cluster += 1;
            }
        }
    }

    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for item in &items {
        let len = item.images.len();
        let bins = by_len.entry(len).or_insert_with(|| vec![0; len]);
        for p in item.relevant_positions() {
            bins[p] += 1;
        }
    }
    let mut worst_z: f64 = 0.0;
    for (len, bins) in &by_len {
        let total: usize = bins.iter().sum();
        let p = 1.0 / *len as f64;
        let sigma = (total as f64 * p * (1.0 - p)).sqrt();
        for &b in bins {
            worst_z = worst_z.max((b as f64 - total as f64 * p).abs() / sigma);
        }
    }
    check(
        counts_ok && same_cluster == 0 && worst_z <= SIGMAS,
        format!(
            "{} items, distractors in 2..=10: {counts_ok}; same-cluster distractors {same_cluster}; position worst |z| {worst_z:.2} over {} lengths",
            items.len(),
            by_len.len()
        ),
    )
}

fn main() {
    let corpus = big_corpus();
    let criteria: Vec<Criterion> = vec![
        ("benchmark validity", Box::new(|| benchmark_validity(&corpus))),
        ("ground-truth and noisy adapters", Box::new(|| adapters(&corpus))),
        ("detector oracle", Box::new(detector_oracle)),
        ("gradient suite", Box::new(gradient_suite)),
        ("compression contract", Box::new(compression)),
        ("filter equivalence", Box::new(filter_equivalence)),
        ("loss closed forms and weighting", Box::new(loss_and_weighting)),
        ("end-to-end toy retrieval", Box::new(end_to_end)),
        ("positional-bias recovery", Box::new(|| positional_bias(&corpus))),
        ("bootstrap std", Box::new(bootstrap_std)),
        ("MIQA builder", Box::new(miqa_builder)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS [{:>2}] {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
