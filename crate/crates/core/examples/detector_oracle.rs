//! Detector-oracle baseline: perfect detections answer every question;
//! dropping detections lowers accuracy.

use vhaystack::haystack::{generate, GenerateParams, ModeSelection};
use vhaystack::metrics::score;
use vhaystack::oracles::{run_detector_oracle, DetectionTable, DEFAULT_ANCHOR_THRESHOLD, DEFAULT_TARGET_THRESHOLD};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn main() -> anyhow::Result<()> {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 2000,
        ..SynthCorpusParams::default()
    });
    let single = generate(&corpus, &GenerateParams::single(200, 50, 1))?;
    let multi = generate(&corpus, &GenerateParams::multi(ModeSelection::MultiAll, 200, 50, 2, 2))?;

    println!("tpr    single  multi-all");
    for tpr in [1.0, 0.9, 0.8, 0.7] {
        let table = DetectionTable::degraded(&corpus, tpr, 0);
        let acc = |b| -> anyhow::Result<f64> {
            let t = run_detector_oracle(b, &table, DEFAULT_ANCHOR_THRESHOLD, DEFAULT_TARGET_THRESHOLD)?;
            Ok(score(&t, b)?.accuracy)
        };
        println!("{tpr:.1}    {:.3}   {:.3}", acc(&single)?, acc(&multi)?);
    }
    Ok(())
}
