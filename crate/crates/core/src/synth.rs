//! Synthetic annotated corpora for desk-scale experiments.

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::{Corpus, ImageRecord};
use crate::seed::stage_rng;

const OBJECT_NAMES: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
    "bottle",
    "wine glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted plant",
    "bed",
    "dining table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy bear",
    "hair drier",
    "toothbrush",
];

/// Parameters for [`synthetic_corpus`].
#[derive(Debug, Clone)]
pub struct SynthCorpusParams {
    pub n_images: usize,
    pub n_labels: usize,
    pub min_labels: usize,
    pub max_labels: usize,
    pub seed: u64,
}

impl Default for SynthCorpusParams {
    fn default() -> Self {
        Self {
            n_images: 1000,
            n_labels: 40,
            min_labels: 1,
            max_labels: 3,
            seed: 0,
        }
    }
}

/// Label name for the `i`-th synthetic object class.
pub fn label_name(i: usize) -> String {
    OBJECT_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("object{i}"))
}

/// A corpus where every image carries a uniformly drawn set of
/// `min_labels..=max_labels` distinct labels.
pub fn synthetic_corpus(p: &SynthCorpusParams) -> Corpus {
    assert!(p.n_labels >= 1, "need at least one label");
    assert!(
        p.min_labels >= 1 && p.min_labels <= p.max_labels && p.max_labels <= p.n_labels,
        "label count range must satisfy 1 <= min <= max <= n_labels"
    );
    let mut rng = stage_rng(p.seed, "synthetic-corpus");
    let width = p.n_images.max(1).to_string().len();
    let records = (0..p.n_images)
        .map(|i| {
            let k = rng.gen_range(p.min_labels..=p.max_labels);
            let labels: Vec<String> = sample(&mut rng, p.n_labels, k).into_iter().map(label_name).collect();
            ImageRecord::new(format!("img{i:0width$}"), labels).with_path(format!("images/img{i:0width$}.jpg"))
        })
        .collect();
    Corpus::from_records(records).expect("synthetic ids are unique")
}
