//! Sweep needle depth and haystack size against an answerer with a known
//! accuracy dip in the middle of the context, and render the heatmap.

use std::sync::Arc;

use vhaystack::adapters::{DispatchOptions, Endpoint};
use vhaystack::haystack::GenerateParams;
use vhaystack::metrics::{emit_report, positional_bias_run, BiasParams, ReportInput, DEFAULT_DEPTHS};
use vhaystack::oracles::{Curve, Profile, ScriptedAdapter};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn main() -> anyhow::Result<()> {
    let corpus = Arc::new(synthetic_corpus(&SynthCorpusParams::default()));
    let curve = Curve::dip_at_middle();
    let adapter = ScriptedAdapter::new(Profile::Positional(curve.clone()), corpus.clone(), 3);
    let params = BiasParams {
        generator: GenerateParams::single(200, 0, 5),
        resamples: 500,
        dispatch: DispatchOptions::default(),
    };
    let sizes = [5, 10, 20];
    let grid = positional_bias_run(
        &corpus,
        &params,
        &DEFAULT_DEPTHS,
        &sizes,
        &Endpoint::in_process(adapter),
    )?;

    print!("size ");
    for d in &DEFAULT_DEPTHS {
        print!("  depth {d:<4}");
    }
    println!();
    for &size in &sizes {
        print!("{size:>4} ");
        for cell in grid.row(size).expect("size in grid") {
            print!("  {:.3}±{:.3}", cell.accuracy, cell.std);
        }
        println!();
    }
    let cell = &grid.row(20).expect("size in grid")[2];
    println!(
        "N=20 middle: measured {:.3}, programmed {:.3} at realized depth {:.3}",
        cell.accuracy,
        curve.eval(cell.realized_depth()),
        cell.realized_depth()
    );
    let files = emit_report(
        ReportInput::Grid(&grid),
        std::env::temp_dir().join("vhaystack_example_bias"),
    )?;
    println!("wrote {files:?}");
    Ok(())
}
