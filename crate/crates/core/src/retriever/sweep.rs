use serde::{Deserialize, Serialize};

use super::{FeatureSet, RetrieverError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Retained positives over all positives; NaN when there are no positives.
    pub recall: f64,
    /// Retained positives over retained; 1.0 when nothing is retained.
    pub precision: f64,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub positives: usize,
    /// No positive labels, so recall is undefined at every threshold.
    pub undefined_recall: bool,
}

/// Recall and precision when keeping every score >= threshold.
pub fn recall_sweep(scores: &[f64], labels: &[u8], thresholds: &[f64]) -> Result<SweepCurve, RetrieverError> {
    if scores.len() != labels.len() {
        return Err(RetrieverError::Config(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l > 0).count();
    let points = thresholds
        .iter()
        .map(|&t| {
            let (mut kept, mut hits) = (0usize, 0usize);
            for (s, l) in scores.iter().zip(labels) {
                if *s >= t {
                    kept += 1;
                    hits += usize::from(*l > 0);
                }
            }
            SweepPoint {
                threshold: t,
                recall: if positives == 0 {
                    f64::NAN
                } else {
                    hits as f64 / positives as f64
                },
                precision: if kept == 0 { 1.0 } else { hits as f64 / kept as f64 },
                retained: kept,
            }
        })
        .collect();
    Ok(SweepCurve {
        points,
        positives,
        undefined_recall: positives == 0,
    })
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

impl SweepCurve {
    /// Best recall among thresholds whose precision reaches `min_precision`.
    pub fn recall_at_precision(&self, min_precision: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.precision >= min_precision && p.retained > 0)
            .map(|p| p.recall)
            .fold(None, |best, r| Some(best.map_or(r, |b: f64| b.max(r))))
    }

    pub fn at(&self, threshold: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.threshold == threshold)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["threshold", "recall", "precision", "retained"])
            .expect("in-memory csv");
        for p in &self.points {
            w.write_record([
                format!("{:.4}", p.threshold),
                format!("{:.6}", p.recall),
                format!("{:.6}", p.precision),
                p.retained.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

/// Cosine similarity between the mean-pooled query and mean-pooled patches,
/// mapped to `[0, 1]` by `(cos + 1) / 2`. Row `q` holds query `q`'s scores.
pub fn cosine_baseline(features: &FeatureSet) -> Vec<Vec<f64>> {
    let pooled: Vec<_> = (0..features.images.len()).map(|i| features.pooled(i)).collect();
    features
        .queries
        .iter()
        .map(|q| {
            let qv = q.query.col_sum();
            pooled
                .iter()
                .map(|p| (cosine(qv.data(), p.data()) + 1.0) / 2.0)
                .collect()
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scorer() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1, 1, 0, 0];
        let c = recall_sweep(&scores, &labels, &[0.0, 0.5, 0.8, 0.85]).unwrap();
        let r: Vec<f64> = c.points.iter().map(|p| p.recall).collect();
        assert_eq!(r, [1.0, 1.0, 1.0, 0.5]);
        assert_eq!(c.points[1].precision, 1.0);
        assert_eq!(c.points[0].precision, 0.5);
    }

    #[test]
    fn no_positives_is_flagged() {
        let c = recall_sweep(&[0.2], &[0], &[0.0]).unwrap();
        assert!(c.undefined_recall && c.points[0].recall.is_nan());
        assert!(recall_sweep(&[0.2], &[], &[0.0]).is_err());
    }

    #[test]
    fn recall_is_monotone_in_threshold() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 49.0).collect();
        let labels: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
        let c = recall_sweep(&scores, &labels, &default_thresholds()).unwrap();
        assert_eq!(c.points[0].recall, 1.0);
        assert!(c.points.windows(2).all(|w| w[1].recall <= w[0].recall));
    }
}
