use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::seed::stage_rng;

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    /// Mean of the resample means.
    pub mean: f64,
    /// Standard deviation of the resample means.
    pub std: f64,
}

/// Draw `resamples` size-n resamples with replacement and summarize their means.
pub fn bootstrap(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if resamples == 0 {
        return Err(MetricsError::ZeroResamples);
    }
    let n = values.len();
    let mut rng = stage_rng(seed, "bootstrap");
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / resamples as f64;
    Ok(BootstrapStats { mean, std: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_vector_has_zero_spread() {
        let s = bootstrap(&[1.0; 4], 50, 1).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn half_of_four_matches_binomial_se() {
        // sqrt(0.5 * 0.5 / 4) = 0.25
        let s = bootstrap(&[1.0, 1.0, 0.0, 0.0], 10_000, 2).unwrap();
        assert!((s.std - 0.25).abs() <= 0.02, "{}", s.std);
    }

    #[test]
    fn errors() {
        assert!(matches!(bootstrap(&[], 10, 0), Err(MetricsError::EmptySample)));
        assert!(matches!(bootstrap(&[1.0], 0, 0), Err(MetricsError::ZeroResamples)));
    }

    #[test]
    fn deterministic() {
        let v: Vec<f64> = (0..50).map(|i| (i % 3 == 0) as u8 as f64).collect();
        assert_eq!(bootstrap(&v, 100, 9).unwrap(), bootstrap(&v, 100, 9).unwrap());
    }

    #[test]
    fn mean_converges_to_sample_mean() {
        let v: Vec<f64> = (0..200).map(|i| (i % 5 < 2) as u8 as f64).collect();
        let sample_mean = v.iter().sum::<f64>() / v.len() as f64;
        for seed in 0..20 {
            let b = 500;
            let s = bootstrap(&v, b, seed).unwrap();
            assert!((s.mean - sample_mean).abs() <= 3.0 * s.std / (b as f64).sqrt() + 1e-12);
        }
    }
}
