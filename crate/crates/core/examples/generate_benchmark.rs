//! Build single- and multi-needle benchmarks from a synthetic corpus,
//! validate them against the annotations and write them to disk.

use vhaystack::haystack::{generate, subset_small, validate_benchmark, GenerateParams, ModeSelection};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};
use vhaystack::BenchmarkSet;

fn main() -> anyhow::Result<()> {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 5000,
        seed: 1,
        ..SynthCorpusParams::default()
    });
    let single = generate(&corpus, &GenerateParams::single(100, 50, 7))?;
    let multi = generate(
        &corpus,
        &GenerateParams::multi(ModeSelection::MultiMixed { all_fraction: 0.5 }, 100, 50, 3, 8),
    )?;

    for (name, bench) in [("single", &single), ("multi", &multi)] {
        let report = validate_benchmark(bench, &corpus);
        println!(
            "{name}: {} questions, balance {:?}, {} violations, {:.1}% of distractors carry the target",
            bench.len(),
            report.balance,
            report.violations.len(),
            100.0 * report.target_distractor_fraction
        );
    }
    let q = &single.specs[0];
    println!(
        "example: {} -> {} (needle at {:?})",
        q.render(),
        q.answer.as_str(),
        q.needle_positions()
    );

    let small = subset_small(&single, 10, 3)?;
    println!("stratified subset: {:?}", small.balance());

    let out = std::env::temp_dir().join("vhaystack_example_benchmark.json");
    BenchmarkSet::merge(vec![single, multi])
        .expect("non-empty")
        .save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
