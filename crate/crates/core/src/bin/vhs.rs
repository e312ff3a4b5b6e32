//! `vhs`: command-line front end for the `vhaystack` library.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O or endpoint failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vhaystack::adapters::{
    conformance::check_stdio_adapter, dispatch, serve_lines, DispatchError, DispatchOptions, Endpoint, Normalized,
    Transcript, TranscriptEntry,
};
use vhaystack::corpus::Corpus;
use vhaystack::haystack::{generate, subset_small, validate_benchmark, BenchmarkSet, GenerateParams, ModeSelection};
use vhaystack::manifest::RunManifest;
use vhaystack::metrics::{
    emit_report, positional_bias_run, score, summarize_by_size, BiasGrid, BiasParams, MetricsError, ReportInput,
    SizeSummary, DEFAULT_RESAMPLES,
};
use vhaystack::miqa::{
    build_mixture, cluster_by_keywords, inject_all, qa_from_corpus, qa_from_jsonl, to_jsonl, InjectOptions, MiqaError,
    Source,
};
use vhaystack::neural::checkpoint;
use vhaystack::neural::NeuralError;
use vhaystack::oracles::{
    caption_aggregate, run_detector_oracle, DetectionTable, Profile, ScriptedAdapter, ScriptedCaptionReader,
    ScriptedCaptioner, DEFAULT_ANCHOR_THRESHOLD, DEFAULT_TARGET_THRESHOLD,
};
use vhaystack::retriever::{
    filter, score_all, synth_features, train, FeatureSet, ModelConfig, Retriever, RetrieverConfig, RetrieverError,
    SynthFeatureParams, TrainOptions,
};
use vhaystack::seed::derive_seed;
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

#[derive(Parser)]
#[command(
    name = "vhs",
    version,
    about = "Visual haystack benchmarks, evaluation and toy retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a balanced benchmark from an annotated corpus.
    Gen(GenArgs),
    /// Send a benchmark to an answerer and score the replies.
    Eval(EvalArgs),
    /// Accuracy over haystack size x needle depth.
    Bias(BiasArgs),
    /// Run the detector or caption-aggregation baseline.
    Oracle(OracleArgs),
    /// Train the toy retriever on a feature file.
    TrainRetriever(TrainArgs),
    /// Score and filter every (query, image) pair with a trained retriever.
    Score(ScoreArgs),
    /// Build multi-image QA data from single-image QA items.
    BuildMiqa(MiqaArgs),
    /// Render CSV and SVG reports from eval or bias results.
    Report(ReportArgs),
    /// Check a benchmark against its corpus.
    Validate(ValidateArgs),
    /// Write a synthetic annotated corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Write synthetic patch features for a corpus.
    SynthFeatures(SynthFeaturesArgs),
    /// Act as a stdio adapter backed by a scripted answerer.
    Serve(ServeArgs),
    /// Run the protocol conformance checks against a stdio adapter.
    Conformance(ConformanceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    MultiAll,
    MultiAny,
    /// Half ALL, half ANY.
    Multi,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Transport {
    Stdio,
    Http,
    /// In-process scripted answerer; the endpoint names the profile.
    Scripted,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "single")]
    mode: ModeArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    size: usize,
    /// Needles per question (multi modes: 2 or 3).
    #[arg(long)]
    needles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep a stratified subset of this many questions.
    #[arg(long)]
    small: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EndpointArgs {
    /// Command line (stdio), URL (http) or profile (scripted).
    #[arg(long)]
    endpoint: String,
    #[arg(long, value_enum, default_value = "stdio")]
    transport: Transport,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Image cap for scripted endpoints.
    #[arg(long)]
    max_images: Option<usize>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    benchmark: PathBuf,
    /// Corpus for image paths; required by scripted endpoints.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct BiasArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    depths: Vec<f64>,
    /// Questions per cell.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Detector,
    Caption,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    kind: OracleKind,
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Detection table; defaults to annotation-perfect detections.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Degrade the perfect table to this true-positive rate.
    #[arg(long)]
    tpr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ANCHOR_THRESHOLD)]
    anchor_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_TARGET_THRESHOLD)]
    target_threshold: f64,
    /// Captioner command (stdio); the scripted captioner when absent.
    #[arg(long)]
    captioner: Option<String>,
    /// Text answerer command (stdio); the scripted reader when absent.
    #[arg(long)]
    llm: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 5.0)]
    pos_weight: f64,
    #[arg(long, default_value_t = 0.6)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 4)]
    queries_per_step: usize,
    /// Train the relevance head only.
    #[arg(long)]
    freeze_compressor: bool,
    /// Learned queries (tokens per image).
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    eval_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct MiqaArgs {
    /// Single-image QA items as JSON lines `{"id","image","question","answer"}`.
    #[arg(long, conflicts_with = "corpus")]
    qa: Option<PathBuf>,
    /// Template one question per image of this corpus instead.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_overlap: usize,
    #[arg(long, default_value_t = 2)]
    min_distractors: usize,
    #[arg(long, default_value_t = 10)]
    max_distractors: usize,
    /// Extra MIQA JSONL sources to blend in, as `path:weight`.
    #[arg(long)]
    mix: Vec<String>,
    /// Weight of the freshly built set when mixing.
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// `summary.json` written by `eval`.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    results: Option<PathBuf>,
    /// `grid.json` written by `bias`.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthCorpusArgs {
    #[arg(long, default_value_t = 1000)]
    n_images: usize,
    #[arg(long, default_value_t = 40)]
    n_labels: usize,
    #[arg(long, default_value_t = 1)]
    min_labels: usize,
    #[arg(long, default_value_t = 3)]
    max_labels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SynthFeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 576)]
    t: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// always_yes | ground_truth | noisy:<p> | positional:dip | positional:const:<p>
    #[arg(long, default_value = "ground_truth")]
    profile: String,
    #[arg(long)]
    max_images: Option<usize>,
    /// Question ids to stall on before answering.
    #[arg(long, value_delimiter = ',')]
    stall_on: Vec<String>,
    #[arg(long, default_value_t = 30)]
    stall_secs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct ConformanceArgs {
    /// Adapter command line.
    #[arg(long)]
    adapter: String,
    #[arg(long, default_value_t = 10)]
    wait_secs: u64,
}

/// Failure classes mapped onto exit codes.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() {
            return 2;
        }
        let unreachable = |d: &DispatchError| matches!(d, DispatchError::Unreachable { .. });
        if let Some(d) = cause.downcast_ref::<DispatchError>() {
            if unreachable(d) {
                return 2;
            }
        }
        match cause.downcast_ref::<MetricsError>() {
            Some(MetricsError::Dispatch(d)) if unreachable(d) => return 2,
            Some(MetricsError::Io { .. }) => return 2,
            _ => {}
        }
        if matches!(cause.downcast_ref::<RetrieverError>(), Some(RetrieverError::Io(_))) {
            return 2;
        }
        if matches!(cause.downcast_ref::<MiqaError>(), Some(MiqaError::Io(_))) {
            return 2;
        }
        if matches!(cause.downcast_ref::<NeuralError>(), Some(NeuralError::Io(_))) {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bias(a) => cmd_bias(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::TrainRetriever(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::BuildMiqa(a) => cmd_miqa(a),
        Command::Report(a) => cmd_report(a),
        Command::Validate(a) => cmd_validate(a),
        Command::SynthCorpus(a) => cmd_synth_corpus(a),
        Command::SynthFeatures(a) => cmd_synth_features(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Conformance(a) => cmd_conformance(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn make_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::from_json_str(&read_text(path)?).with_context(|| format!("corpus {}", path.display()))
}

fn load_benchmark(path: &Path) -> Result<BenchmarkSet> {
    BenchmarkSet::from_json_str(&read_text(path)?).with_context(|| format!("benchmark {}", path.display()))
}

fn load_features(path: &Path) -> Result<FeatureSet> {
    FeatureSet::from_bytes(&read_bytes(path)?).with_context(|| format!("features {}", path.display()))
}

fn load_retriever(path: &Path) -> Result<Retriever> {
    let cfg: ModelConfig = serde_json::from_str(&read_text(&Retriever::config_path(path))?)
        .map_err(|e| anyhow!("model config for {}: {e}", path.display()))?;
    let params = checkpoint::from_bytes(&read_bytes(path)?)?;
    Ok(Retriever::from_params(cfg, &params)?)
}

fn write_manifest(m: RunManifest, output: &Path) -> Result<()> {
    m.write_for(output)
        .with_context(|| format!("writing manifest for {}", output.display()))?;
    Ok(())
}

fn build_endpoint(a: &EndpointArgs, corpus: Option<&Arc<Corpus>>, seed: u64) -> Result<Endpoint> {
    Ok(match a.transport {
        Transport::Stdio => Endpoint::stdio_command(&a.endpoint),
        Transport::Http => Endpoint::Http {
            url: a.endpoint.clone(),
        },
        Transport::Scripted => {
            let profile: Profile = a.endpoint.parse()?;
            let corpus = corpus.ok_or_else(|| anyhow!("scripted endpoints need --corpus"))?;
            Endpoint::in_process(ScriptedAdapter::new(profile, corpus.clone(), seed).with_max_images(a.max_images))
        }
    })
}

fn dispatch_opts(a: &EndpointArgs) -> DispatchOptions {
    DispatchOptions {
        parallelism: a.parallelism,
        timeout: Duration::from_secs(a.timeout_secs),
        ..DispatchOptions::default()
    }
}

fn endpoint_flags(m: RunManifest, a: &EndpointArgs) -> RunManifest {
    let m = m
        .flag("endpoint", &a.endpoint)
        .flag(
            "transport",
            a.transport.to_possible_value().expect("no skipped variants").get_name(),
        )
        .flag("parallelism", a.parallelism)
        .flag("timeout-secs", a.timeout_secs);
    match a.max_images {
        Some(n) => m.flag("max-images", n),
        None => m,
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let mode = match a.mode {
        ModeArg::Single => ModeSelection::Single,
        ModeArg::MultiAll => ModeSelection::MultiAll,
        ModeArg::MultiAny => ModeSelection::MultiAny,
        ModeArg::Multi => ModeSelection::MultiMixed { all_fraction: 0.5 },
    };
    let params = match mode {
        ModeSelection::Single => {
            if a.needles.is_some_and(|n| n != 1) {
                bail!("single mode uses exactly one needle");
            }
            GenerateParams::single(a.n, a.size, a.seed)
        }
        m => GenerateParams::multi(m, a.n, a.size, a.needles.unwrap_or(2), a.seed),
    };
    let mut bench = generate(&corpus, &params)?;
    if let Some(k) = a.small {
        bench = subset_small(&bench, k, derive_seed(a.seed, "small"))?;
    }
    write_file(&a.out, bench.to_json_string())?;
    let mut m = RunManifest::new("gen")
        .flag(
            "mode",
            a.mode.to_possible_value().expect("no skipped variants").get_name(),
        )
        .flag("n", a.n)
        .flag("size", a.size)
        .flag("needles", params.n_needles)
        .seed("seed", a.seed)
        .input(&a.corpus)?;
    if let Some(k) = a.small {
        m = m.flag("small", k);
    }
    write_manifest(m, &a.out)?;
    println!("wrote {} questions to {}", bench.len(), a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let bench = load_benchmark(&a.benchmark)?;
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?.map(Arc::new);
    let endpoint = build_endpoint(&a.endpoint, corpus.as_ref(), derive_seed(a.seed, "adapter"))?;
    let transcript = dispatch(&bench, corpus.as_deref(), &endpoint, &dispatch_opts(&a.endpoint))?;
    let result = score(&transcript, &bench)?;
    let summary = summarize_by_size(&result, a.resamples, derive_seed(a.seed, "bootstrap"))?;
    make_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("transcript.json"), transcript.to_json_string())?;
    write_file(&a.out_dir.join("scores.csv"), result.to_csv())?;
    write_file(
        &a.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    emit_report(ReportInput::Results(&summary), &a.out_dir)?;
    let mut m = endpoint_flags(RunManifest::new("eval"), &a.endpoint)
        .flag("resamples", a.resamples)
        .seed("seed", a.seed)
        .input(&a.benchmark)?;
    if let Some(c) = &a.corpus {
        m = m.input(c)?;
    }
    write_manifest(m, &a.out_dir)?;
    for s in &summary {
        println!(
            "size {:>6}  accuracy {:.4} ± {:.4}  n {}  compliance {:.3}",
            s.size, s.mean, s.std, s.n, s.compliance
        );
    }
    Ok(())
}

fn cmd_bias(a: BiasArgs) -> Result<()> {
    let corpus = Arc::new(load_corpus(&a.corpus)?);
    let endpoint = build_endpoint(&a.endpoint, Some(&corpus), derive_seed(a.seed, "adapter"))?;
    let params = BiasParams {
        generator: GenerateParams::single(a.n, 1, a.seed),
        resamples: a.resamples,
        dispatch: dispatch_opts(&a.endpoint),
    };
    let grid = positional_bias_run(&corpus, &params, &a.depths, &a.sizes, &endpoint)?;
    make_dir(&a.out_dir)?;
    write_file(
        &a.out_dir.join("grid.json"),
        serde_json::to_string_pretty(&grid)? + "\n",
    )?;
    emit_report(ReportInput::Grid(&grid), &a.out_dir)?;
    let m = endpoint_flags(RunManifest::new("bias"), &a.endpoint)
        .flag("sizes", join(&a.sizes))
        .flag("depths", join(&a.depths))
        .flag("n", a.n)
        .flag("resamples", a.resamples)
        .seed("seed", a.seed)
        .input(&a.corpus)?;
    write_manifest(m, &a.out_dir)?;
    for c in &grid.cells {
        if c.evaluated {
            println!("size {:>5} depth {:.2}  accuracy {:.3}", c.size, c.depth, c.accuracy);
        } else {
            println!("size {:>5} depth {:.2}  E", c.size, c.depth);
        }
    }
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let bench = load_benchmark(&a.benchmark)?;
    let corpus = Arc::new(load_corpus(&a.corpus)?);
    let mut m = RunManifest::new("oracle")
        .seed("seed", a.seed)
        .input(&a.benchmark)?
        .input(&a.corpus)?;
    let transcript = match a.kind {
        OracleKind::Detector => {
            m = m
                .flag("kind", "detector")
                .flag("anchor-threshold", a.anchor_threshold)
                .flag("target-threshold", a.target_threshold);
            let table = match (&a.detections, a.tpr) {
                (Some(_), Some(_)) => bail!("--detections and --tpr are exclusive"),
                (Some(p), None) => {
                    m = m.input(p)?;
                    DetectionTable::from_json_str(&read_text(p)?)?
                }
                (None, Some(tpr)) => {
                    if !(0.0..=1.0).contains(&tpr) {
                        bail!("--tpr {tpr} outside [0, 1]");
                    }
                    m = m.flag("tpr", tpr);
                    DetectionTable::degraded(&corpus, tpr, derive_seed(a.seed, "detections"))
                }
                (None, None) => DetectionTable::perfect(&corpus),
            };
            run_detector_oracle(&bench, &table, a.anchor_threshold, a.target_threshold)?
        }
        OracleKind::Caption => {
            m = m.flag("kind", "caption");
            let captioner = match &a.captioner {
                Some(c) => {
                    m = m.flag("captioner", c);
                    Endpoint::stdio_command(c)
                }
                None => Endpoint::in_process(ScriptedCaptioner { corpus: corpus.clone() }),
            };
            let llm = match &a.llm {
                Some(c) => {
                    m = m.flag("llm", c);
                    Endpoint::stdio_command(c)
                }
                None => Endpoint::in_process(ScriptedCaptionReader),
            };
            let opts = DispatchOptions::default();
            let mut entries = Vec::with_capacity(bench.len());
            for spec in &bench.specs {
                let out = caption_aggregate(spec, Some(&corpus), &captioner, &llm, &opts)?;
                entries.push(TranscriptEntry {
                    question_id: spec.question_id.clone(),
                    raw_text: out.raw_text,
                    normalized: out.normalized,
                    latency_ms: 0.0,
                    timed_out: false,
                    unevaluated: false,
                    error: out.cause,
                });
            }
            Transcript::from_entries(entries, None)
        }
    };
    let result = score(&transcript, &bench)?;
    let summary = summarize_by_size(&result, DEFAULT_RESAMPLES, derive_seed(a.seed, "bootstrap"))?;
    make_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("transcript.json"), transcript.to_json_string())?;
    write_file(&a.out_dir.join("scores.csv"), result.to_csv())?;
    write_file(
        &a.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_manifest(m, &a.out_dir)?;
    let noncompliant = transcript
        .entries
        .iter()
        .filter(|e| e.normalized == Normalized::Noncompliant)
        .count();
    println!(
        "accuracy {:.4} over {} questions ({noncompliant} noncompliant)",
        result.accuracy,
        bench.len()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let features = load_features(&a.features)?;
    let config = RetrieverConfig {
        positive_weight: a.pos_weight,
        schedule_split: a.split,
        ..RetrieverConfig::default()
    };
    let mut mc = ModelConfig::new(features.d);
    mc.k = a.k;
    let opts = TrainOptions {
        steps: a.steps,
        seed: a.seed,
        learning_rate: a.lr,
        eval_every: a.eval_every,
        queries_per_step: a.queries_per_step,
        train_compressor: !a.freeze_compressor,
        ..TrainOptions::default()
    };
    let out = match train(&features, mc, &config, &opts) {
        Err(RetrieverError::Diverged { step, last_good }) => {
            last_good.save(&a.out)?;
            bail!(
                "training diverged at step {step}; last good parameters saved to {}",
                a.out.display()
            );
        }
        r => r?,
    };
    out.model.save(&a.out)?;
    let mut log = csv::Writer::from_writer(Vec::new());
    for e in &out.log {
        log.serialize(e)?;
    }
    let log_path = PathBuf::from(format!("{}.log.csv", a.out.display()));
    write_file(&log_path, log.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    let m = RunManifest::new("train-retriever")
        .flag("steps", a.steps)
        .flag("pos-weight", a.pos_weight)
        .flag("split", a.split)
        .flag("lr", a.lr)
        .flag("queries-per-step", a.queries_per_step)
        .flag("freeze-compressor", a.freeze_compressor)
        .flag("k", a.k)
        .flag("eval-every", a.eval_every)
        .seed("seed", a.seed)
        .input(&a.features)?;
    write_manifest(m, &a.out)?;
    if let Some(e) = out.log.last() {
        println!(
            "step {}  loss {:.4}  recall@{} {:.3}  precision {:.3}",
            e.step, e.loss, config.threshold, e.recall, e.precision
        );
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct QueryScores<'a> {
    anchor: &'a str,
    scores: Vec<f64>,
    retained: Vec<&'a str>,
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let model = load_retriever(&a.checkpoint)?;
    let features = load_features(&a.features)?;
    let config = RetrieverConfig {
        threshold: a.threshold,
        top_k_cap: a.cap,
        ..RetrieverConfig::default()
    };
    config.validate()?;
    let scores = score_all(&model, &features)?;
    let mut rows = Vec::with_capacity(scores.len());
    for (q, s) in features.queries.iter().zip(scores) {
        let kept = filter(&s, &config)?;
        rows.push(QueryScores {
            anchor: &q.anchor,
            retained: kept.iter().map(|&i| features.images[i].id.as_str()).collect(),
            scores: s,
        });
    }
    write_file(&a.out, serde_json::to_string_pretty(&rows)? + "\n")?;
    let mut m = RunManifest::new("score")
        .flag("threshold", a.threshold)
        .input(&a.checkpoint)?
        .input(&a.features)?;
    if let Some(c) = a.cap {
        m = m.flag("cap", c);
    }
    write_manifest(m, &a.out)?;
    let kept: usize = rows.iter().map(|r| r.retained.len()).sum();
    println!(
        "scored {} queries x {} images; {kept} retained",
        rows.len(),
        features.images.len()
    );
    Ok(())
}

fn cmd_miqa(a: MiqaArgs) -> Result<()> {
    let mut m = RunManifest::new("build-miqa")
        .flag("min-overlap", a.min_overlap)
        .flag("min-distractors", a.min_distractors)
        .flag("max-distractors", a.max_distractors)
        .seed("seed", a.seed);
    let qa = match (&a.qa, &a.corpus) {
        (Some(p), None) => {
            m = m.input(p)?;
            qa_from_jsonl(&read_text(p)?)?
        }
        (None, Some(p)) => {
            m = m.input(p)?;
            qa_from_corpus(&load_corpus(p)?, derive_seed(a.seed, "qa"))
        }
        _ => bail!("pass exactly one of --qa or --corpus"),
    };
    if qa.is_empty() {
        bail!("no QA items");
    }
    let clusters = cluster_by_keywords(&qa, a.min_overlap);
    let opts = InjectOptions {
        min_distractors: a.min_distractors,
        max_distractors: a.max_distractors,
    };
    let built = inject_all(&qa, &clusters, opts, derive_seed(a.seed, "inject"))?;

    let mut extra = Vec::new();
    for spec in &a.mix {
        let (path, w) = spec
            .rsplit_once(':')
            .ok_or_else(|| anyhow!("--mix expects path:weight, got {spec:?}"))?;
        let w: f64 = w.parse().map_err(|_| anyhow!("bad weight in {spec:?}"))?;
        let items = vhaystack::miqa::from_jsonl(&read_text(Path::new(path))?)?;
        m = m.input(path)?.flag(&format!("mix:{path}"), w);
        extra.push((path.to_string(), items, w));
    }
    let mut sources = vec![Source::new("built", &built, a.weight)];
    sources.extend(extra.iter().map(|(n, items, w)| Source::new(n.clone(), items, *w)));
    let n = if a.mix.is_empty() {
        None
    } else {
        Some(sources.iter().map(|s| s.items.len()).sum())
    };
    let (items, stats) = build_mixture(&sources, n, derive_seed(a.seed, "mixture"))?;

    write_file(&a.out, to_jsonl(&items))?;
    let stats_path = PathBuf::from(format!("{}.stats.json", a.out.display()));
    write_file(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")?;
    write_manifest(m, &a.out)?;
    println!(
        "{} items from {} clusters; distractor counts {:?}",
        items.len(),
        clusters.len(),
        stats.distractor_counts
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    make_dir(&a.out_dir)?;
    let mut m = RunManifest::new("report");
    let written = if let Some(p) = &a.results {
        let summary: Vec<SizeSummary> = serde_json::from_str(&read_text(p)?)?;
        m = m.input(p)?;
        emit_report(ReportInput::Results(&summary), &a.out_dir)?
    } else {
        let p = a.grid.as_ref().expect("clap enforces one input");
        let grid: BiasGrid = serde_json::from_str(&read_text(p)?)?;
        m = m.input(p)?;
        emit_report(ReportInput::Grid(&grid), &a.out_dir)?
    };
    write_manifest(m, &a.out_dir)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let bench = load_benchmark(&a.benchmark)?;
    let corpus = load_corpus(&a.corpus)?;
    let report = validate_benchmark(&bench, &corpus);
    if let Some(out) = &a.out {
        write_file(out, serde_json::to_string_pretty(&report)? + "\n")?;
        let m = RunManifest::new("validate").input(&a.benchmark)?.input(&a.corpus)?;
        write_manifest(m, out)?;
    }
    for (mode, [yes, no]) in &report.balance {
        println!("{mode}: {yes} yes / {no} no");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for v in &report.violations {
        println!("violation [{}] {}: {}", v.kind, v.question_id, v.detail);
    }
    if report.is_clean() {
        println!("{} questions, 0 violations", report.n_questions);
        Ok(())
    } else {
        bail!("{} violation(s)", report.violations.len())
    }
}

fn cmd_synth_corpus(a: SynthCorpusArgs) -> Result<()> {
    if a.n_labels == 0 || a.min_labels == 0 || a.min_labels > a.max_labels || a.max_labels > a.n_labels {
        bail!("label counts must satisfy 1 <= min-labels <= max-labels <= n-labels");
    }
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: a.n_images,
        n_labels: a.n_labels,
        min_labels: a.min_labels,
        max_labels: a.max_labels,
        seed: a.seed,
    });
    write_file(&a.out, corpus.to_json_string())?;
    let m = RunManifest::new("synth-corpus")
        .flag("n-images", a.n_images)
        .flag("n-labels", a.n_labels)
        .flag("min-labels", a.min_labels)
        .flag("max-labels", a.max_labels)
        .seed("seed", a.seed);
    write_manifest(m, &a.out)?;
    println!("wrote {} images to {}", corpus.len(), a.out.display());
    Ok(())
}

fn cmd_synth_features(a: SynthFeaturesArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let fs = synth_features(&corpus, &SynthFeatureParams::new(a.d, a.t, a.noise, a.seed))?;
    write_file(&a.out, fs.to_bytes())?;
    let m = RunManifest::new("synth-features")
        .flag("d", a.d)
        .flag("t", a.t)
        .flag("noise", a.noise)
        .seed("seed", a.seed)
        .input(&a.corpus)?;
    write_manifest(m, &a.out)?;
    println!(
        "wrote {} images x {} patches, {} queries",
        fs.images.len(),
        fs.t,
        fs.queries.len()
    );
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let corpus = Arc::new(load_corpus(&a.corpus)?);
    let profile: Profile = a.profile.parse()?;
    let adapter = ScriptedAdapter::new(profile, corpus, a.seed)
        .with_max_images(a.max_images)
        .with_stall(a.stall_on, Duration::from_secs(a.stall_secs));
    let stdin = std::io::stdin();
    serve_lines(&adapter, stdin.lock(), std::io::stdout().lock())?;
    Ok(())
}

fn cmd_conformance(a: ConformanceArgs) -> Result<()> {
    let mut parts = a.adapter.split_whitespace().map(str::to_string);
    let program = parts.next().ok_or_else(|| anyhow!("empty --adapter"))?;
    let args: Vec<String> = parts.collect();
    let report = check_stdio_adapter(&program, &args, Duration::from_secs(a.wait_secs))?;
    for c in &report.checks {
        println!("{} {}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        bail!("adapter failed conformance")
    }
}
