//! Train the toy retriever on synthetic features, then compare
//! filter-then-read against a reader that sees 10 random images.

use std::sync::Arc;
use std::time::Instant;

use vhaystack::haystack::{generate, GenerateParams};
use vhaystack::metrics::score;
use vhaystack::oracles::{Profile, ScriptedAdapter};
use vhaystack::retriever::{
    filter_then_read, random_cap_read, synth_features, train, ModelConfig, RetrieverConfig, SynthFeatureParams,
    TrainOptions,
};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn main() -> anyhow::Result<()> {
    let start = Instant::now();
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: 200,
        n_labels: 8,
        min_labels: 1,
        max_labels: 2,
        seed: 1,
    }));
    let features = synth_features(&corpus, &SynthFeatureParams::new(16, 16, 0.1, 2))?;
    let config = RetrieverConfig::default();
    let opts = TrainOptions {
        steps: 2000,
        seed: 3,
        ..TrainOptions::default()
    };
    let out = train(&features, ModelConfig::new(16), &config, &opts)?;
    for e in &out.log {
        println!(
            "step {:>5}  loss {:.4}  recall@0.5 {:.3}  precision@0.5 {:.3}",
            e.step, e.loss, e.recall, e.precision
        );
    }

    let bench = generate(&corpus, &GenerateParams::single(100, 100, 4))?;
    let reader = ScriptedAdapter::new(Profile::GroundTruth, corpus.clone(), 0);
    let filtered = filter_then_read(&out.model, &features, &bench, &corpus, &config, &reader)?;
    let unfiltered = random_cap_read(&bench, &corpus, 10, 5, &reader);
    let mean_kept = filtered.retained.iter().sum::<usize>() as f64 / filtered.retained.len() as f64;
    println!(
        "filter-then-read accuracy  {:.3}",
        score(&filtered.transcript, &bench)?.accuracy
    );
    println!(
        "random-10 reader accuracy  {:.3}",
        score(&unfiltered.transcript, &bench)?.accuracy
    );
    println!(
        "mean images kept {mean_kept:.2} of 100 ({} tokens each)",
        out.model.config.k
    );
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
