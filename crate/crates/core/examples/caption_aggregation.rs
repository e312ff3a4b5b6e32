//! Caption-then-aggregate baseline: caption every image, then answer
//! from the numbered captions with a text-only reader.

use std::sync::Arc;

use vhaystack::adapters::{DispatchOptions, Endpoint, Normalized};
use vhaystack::haystack::{generate, GenerateParams};
use vhaystack::oracles::{caption_aggregate, ScriptedCaptionReader, ScriptedCaptioner};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn main() -> anyhow::Result<()> {
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams {
        n_images: 500,
        ..SynthCorpusParams::default()
    }));
    let bench = generate(&corpus, &GenerateParams::single(20, 5, 9))?;
    let captioner = Endpoint::in_process(ScriptedCaptioner { corpus: corpus.clone() });
    let reader = Endpoint::in_process(ScriptedCaptionReader);
    let opts = DispatchOptions::default();

    let mut correct = 0;
    for (i, spec) in bench.specs.iter().enumerate() {
        let out = caption_aggregate(spec, Some(&corpus), &captioner, &reader, &opts)?;
        if i == 0 {
            println!(
                "--- prompt for {} ---\n{}\n---",
                spec.question_id,
                out.prompt.as_deref().unwrap_or("")
            );
        }
        let expected = if spec.answer.is_yes() {
            Normalized::Yes
        } else {
            Normalized::No
        };
        correct += usize::from(out.normalized == expected);
    }
    println!("caption aggregation: {correct}/{} correct", bench.len());
    Ok(())
}
