use vhaystack::retriever::{
    cosine_baseline, recall_sweep, score_all, synth_features, train, ModelConfig, RetrieverConfig, SynthFeatureParams,
    TrainOptions,
};
use vhaystack::synth::{synthetic_corpus, SynthCorpusParams};

fn flat(scores: Vec<Vec<f64>>) -> Vec<f64> {
    scores.into_iter().flatten().collect()
}

#[test]
fn trained_toy_separates_anchor_images_from_distractors() {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 200,
        n_labels: 8,
        min_labels: 1,
        max_labels: 2,
        seed: 1,
    });
    let features = synth_features(&corpus, &SynthFeatureParams::new(16, 16, 0.1, 2)).unwrap();
    let opts = TrainOptions {
        steps: 2000,
        seed: 3,
        eval_every: 0,
        ..TrainOptions::default()
    };
    let out = train(&features, ModelConfig::new(16), &RetrieverConfig::default(), &opts).unwrap();
    let scores = score_all(&out.model, &features).unwrap();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (q, row) in features.queries.iter().zip(&scores) {
        for (&l, &s) in q.labels.iter().zip(row) {
            if l > 0 {
                pos.push(s)
            } else {
                neg.push(s)
            }
        }
    }
    let min_pos = pos.iter().cloned().fold(1.0, f64::min);
    let max_neg = neg.iter().cloned().fold(0.0, f64::max);
    println!("min anchor score {min_pos:.4}, max distractor score {max_neg:.4}");
    assert!(min_pos > 0.9, "{min_pos}");
    assert!(max_neg < 0.1, "{max_neg}");
}

#[test]
fn trained_retriever_matches_or_beats_cosine_at_equal_precision() {
    let corpus = synthetic_corpus(&SynthCorpusParams {
        n_images: 200,
        n_labels: 8,
        min_labels: 1,
        max_labels: 4,
        seed: 1,
    });
    let features = synth_features(&corpus, &SynthFeatureParams::new(16, 16, 0.5, 2)).unwrap();
    let opts = TrainOptions {
        steps: 4000,
        seed: 0,
        eval_every: 0,
        ..TrainOptions::default()
    };
    let out = train(&features, ModelConfig::new(16), &RetrieverConfig::default(), &opts).unwrap();
    let labels: Vec<u8> = features.queries.iter().flat_map(|q| q.labels.iter().copied()).collect();
    let thresholds: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let ours = recall_sweep(&flat(score_all(&out.model, &features).unwrap()), &labels, &thresholds).unwrap();
    let base = recall_sweep(&flat(cosine_baseline(&features)), &labels, &thresholds).unwrap();
    for p in [0.8, 0.9, 0.95] {
        let (r, c) = (
            ours.recall_at_precision(p).unwrap_or(0.0),
            base.recall_at_precision(p).unwrap_or(0.0),
        );
        println!("precision >= {p}: retriever recall {r:.3}, cosine recall {c:.3}");
        assert!(r >= c, "p={p}: {r} < {c}");
    }
}
