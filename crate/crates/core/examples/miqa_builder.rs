//! Turn single-image QA into multi-image items by injecting distractors
//! from unrelated keyword clusters, then mix two sources 3:1.

use vhaystack::miqa::{build_mixture, cluster_by_keywords, inject_all, qa_from_corpus, InjectOptions, Source};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn main() -> anyhow::Result<()> {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 600,
        ..SynthCorpusParams::default()
    });
    let qa = qa_from_corpus(&corpus, 1);
    let clusters = cluster_by_keywords(&qa, 1);
    println!("{} QA items in {} keyword clusters", qa.len(), clusters.len());

    let wide = inject_all(&qa, &clusters, InjectOptions::default(), 2)?;
    let narrow = inject_all(&qa, &clusters, InjectOptions::exactly(2), 3)?;
    let item = &wide[0];
    println!("{}: {:?} -> {}", item.id, item.question, item.answer);
    println!(
        "  images {:?}\n  relevant at {:?}",
        item.images,
        item.relevant_positions()
    );

    let (mixed, stats) = build_mixture(
        &[Source::new("wide", &wide, 3.0), Source::new("narrow", &narrow, 1.0)],
        Some(800),
        4,
    )?;
    println!("mixture of {} items: {:?}", mixed.len(), stats.per_source);
    println!("distractor counts {:?}", stats.distractor_counts);
    Ok(())
}
