//! Evaluate scripted answerers against a benchmark and print accuracy per
//! haystack size with bootstrap error bars.

use std::sync::Arc;

use vhaystack::adapters::{dispatch, DispatchOptions, Endpoint};
use vhaystack::haystack::{generate, GenerateParams};
use vhaystack::metrics::{emit_report, score, summarize_by_size, ReportInput, DEFAULT_RESAMPLES};
use vhaystack::oracles::{Profile, ScriptedAdapter};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};
use vhaystack::BenchmarkSet;

fn main() -> anyhow::Result<()> {
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: 3000,
        ..SynthCorpusParams::default()
    }));
    let parts = [1, 10, 100]
        .iter()
        .map(|&size| generate(&corpus, &GenerateParams::single(200, size, size as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let bench = BenchmarkSet::merge(parts).expect("non-empty");
    let opts = DispatchOptions {
        parallelism: 4,
        ..DispatchOptions::default()
    };

    for profile in ["ground_truth", "noisy:0.7", "always_yes"] {
        let adapter = ScriptedAdapter::new(profile.parse::<Profile>()?, corpus.clone(), 1);
        let transcript = dispatch(&bench, Some(&corpus), &Endpoint::in_process(adapter), &opts)?;
        let result = score(&transcript, &bench)?;
        println!(
            "{profile}: accuracy {:.3}, compliance {:.3}",
            result.accuracy, result.compliance_rate
        );
        for row in summarize_by_size(&result, DEFAULT_RESAMPLES, 0)? {
            println!("  size {:>4}: {:.3} ± {:.3} (n={})", row.size, row.mean, row.std, row.n);
        }
        if profile == "noisy:0.7" {
            let dir = std::env::temp_dir().join("vhaystack_example_report");
            let files = emit_report(
                ReportInput::Results(&summarize_by_size(&result, DEFAULT_RESAMPLES, 0)?),
                &dir,
            )?;
            println!("  report: {files:?}");
        }
    }
    Ok(())
}
