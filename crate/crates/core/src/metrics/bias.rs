use serde::{Deserialize, Serialize};

use super::{bootstrap, score, MetricsError};
use crate::adapters::{dispatch, DispatchOptions, Endpoint};
use crate::corpus::Corpus;
use crate::haystack::{depth_index, generate, place_needle, BenchmarkSet, GenerateParams, ModeSelection};
use crate::seed::derive_seed;

pub const DEFAULT_DEPTHS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Depth fractions that put the needle on every index of an `n`-image haystack.
pub fn exhaustive_depths(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone)]
pub struct BiasParams {
    /// Template for per-size generation; `n_questions` is the per-cell count
    /// and `haystack_size` is overridden by the size grid.
    pub generator: GenerateParams,
    pub resamples: usize,
    pub dispatch: DispatchOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCell {
    pub size: usize,
    pub depth: f64,
    /// Haystack index the needle was moved to.
    pub needle_index: usize,
    pub evaluated: bool,
    /// Sample accuracy over the cell's questions.
    pub accuracy: f64,
    pub bootstrap_mean: f64,
    pub std: f64,
    pub n: usize,
    pub compliance: f64,
}

impl BiasCell {
    fn unevaluated(size: usize, depth: f64) -> Self {
        Self {
            size,
            depth,
            needle_index: depth_index(depth, size),
            evaluated: false,
            accuracy: 0.0,
            bootstrap_mean: 0.0,
            std: 0.0,
            n: 0,
            compliance: 0.0,
        }
    }

    /// Depth actually realized after flooring to an index.
    pub fn realized_depth(&self) -> f64 {
        if self.size <= 1 {
            0.0
        } else {
            self.needle_index as f64 / (self.size - 1) as f64
        }
    }
}

/// Accuracy over haystack size (rows) x needle depth (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasGrid {
    pub sizes: Vec<usize>,
    pub depths: Vec<f64>,
    /// Row-major: `cells[row * depths.len() + col]`.
    pub cells: Vec<BiasCell>,
}

impl BiasGrid {
    pub fn cell(&self, row: usize, col: usize) -> &BiasCell {
        &self.cells[row * self.depths.len() + col]
    }

    pub fn row(&self, size: usize) -> Option<&[BiasCell]> {
        let r = self.sizes.iter().position(|&s| s == size)?;
        let w = self.depths.len();
        Some(&self.cells[r * w..(r + 1) * w])
    }
}

/// Evaluate `endpoint` with the single needle moved to each depth, for every
/// haystack size. Sizes above the endpoint's declared capacity, or where the
/// adapter refuses every request as too large, are marked unevaluated.
pub fn positional_bias_run(
    corpus: &Corpus,
    params: &BiasParams,
    depths: &[f64],
    sizes: &[usize],
    endpoint: &Endpoint,
) -> Result<BiasGrid, MetricsError> {
    if params.generator.mode != ModeSelection::Single {
        let mode = match params.generator.mode {
            ModeSelection::MultiAll => crate::haystack::Mode::MultiAll,
            _ => crate::haystack::Mode::MultiAny,
        };
        return Err(MetricsError::MultiNeedle(mode));
    }
    let seed = params.generator.seed;
    let mut cells = Vec::with_capacity(sizes.len() * depths.len());
    for &size in sizes {
        if endpoint.capacity().is_some_and(|cap| size > cap) {
            cells.extend(depths.iter().map(|&d| BiasCell::unevaluated(size, d)));
            continue;
        }
        let mut gp = params.generator.clone();
        gp.haystack_size = size;
        gp.seed = derive_seed(seed, &format!("bias/size/{size}"));
        let base = generate(corpus, &gp)?;
        for (col, &depth) in depths.iter().enumerate() {
            let mut specs = Vec::with_capacity(base.len());
            for s in &base.specs {
                if s.mode.is_multi() {
                    return Err(MetricsError::MultiNeedle(s.mode));
                }
                let mut moved = s.clone();
                moved.haystack_ids = place_needle(&s.haystack_ids, &s.needle_ids[0], depth)?;
                moved.question_id = format!("{}-d{col:02}", s.question_id);
                specs.push(moved);
            }
            let cell_bench = BenchmarkSet {
                metadata: base.metadata.clone(),
                specs,
            };
            let transcript = dispatch(&cell_bench, Some(corpus), endpoint, &params.dispatch)?;
            let result = score(&transcript, &cell_bench)?;
            if result.unevaluated_count() == result.per_question.len() {
                cells.push(BiasCell::unevaluated(size, depth));
                continue;
            }
            let stats = bootstrap(
                &result.correct_vector(),
                params.resamples,
                derive_seed(seed, &format!("bias/boot/{size}/{col}")),
            )?;
            cells.push(BiasCell {
                size,
                depth,
                needle_index: depth_index(depth, size),
                evaluated: true,
                accuracy: result.accuracy,
                bootstrap_mean: stats.mean,
                std: stats.std,
                n: result.per_question.len(),
                compliance: result.compliance_rate,
            });
        }
    }
    Ok(BiasGrid {
        sizes: sizes.to_vec(),
        depths: depths.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_depths_at_size_ten() {
        let idx: Vec<usize> = DEFAULT_DEPTHS.iter().map(|&d| depth_index(d, 10)).collect();
        assert_eq!(idx, [0, 2, 4, 6, 9]);
    }

    #[test]
    fn exhaustive_depths_hit_every_index() {
        for n in 1..=10 {
            let idx: Vec<usize> = exhaustive_depths(n).iter().map(|&d| depth_index(d, n)).collect();
            assert_eq!(idx, (0..n).collect::<Vec<_>>());
        }
    }
}
