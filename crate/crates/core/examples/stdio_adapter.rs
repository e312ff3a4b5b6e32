//! A custom answerer served over the stdin/stdout line protocol.
//!
//! Run without arguments: the example re-launches itself as an adapter
//! process, checks protocol conformance, then evaluates it. Run with
//! `serve` to act as the adapter directly.

use std::sync::Arc;
use std::time::Duration;

use vhaystack::adapters::conformance::check_stdio_adapter;
use vhaystack::adapters::{
    dispatch, serve_lines, AdapterRequest, AdapterResponse, Answerer, DispatchOptions, Endpoint,
};
use vhaystack::haystack::{generate, GenerateParams};
use vhaystack::metrics::score;
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

/// Says "yes" when the question is about the image count being even.
struct ParityGuesser;

impl Answerer for ParityGuesser {
    fn capacity(&self) -> Option<usize> {
        Some(20)
    }

    fn respond(&self, request: &AdapterRequest) -> AdapterResponse {
        let answer = if request.images.len().is_multiple_of(2) {
            "Yes."
        } else {
            "No."
        };
        AdapterResponse::answer(request.id.clone(), answer)
    }
}

fn main() -> anyhow::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("serve") {
        let stdin = std::io::stdin();
        serve_lines(&ParityGuesser, stdin.lock(), std::io::stdout().lock())?;
        return Ok(());
    }
    let me = std::env::current_exe()?.display().to_string();
    let args = vec!["serve".to_string()];

    let report = check_stdio_adapter(&me, &args, Duration::from_secs(10))?;
    for c in &report.checks {
        println!("{:<16} {} {}", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail);
    }

    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams::default()));
    let mut parts = Vec::new();
    for size in [10, 11, 40] {
        parts.push(generate(&corpus, &GenerateParams::single(20, size, 2))?);
    }
    let bench = vhaystack::BenchmarkSet::merge(parts).expect("non-empty");
    let ep = Endpoint::Stdio { program: me, args };
    let transcript = dispatch(&bench, Some(&corpus), &ep, &DispatchOptions::default())?;
    let result = score(&transcript, &bench)?;
    println!(
        "accuracy {:.3} over evaluated questions; {} refused as too large",
        result.accuracy,
        result.unevaluated_count()
    );
    Ok(())
}
