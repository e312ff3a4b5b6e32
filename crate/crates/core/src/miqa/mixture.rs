use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::inject::MiqaItem;
use super::MiqaError;
use crate::seed::stage_rng;

pub struct Source<'a> {
    pub name: String,
    pub items: &'a [MiqaItem],
    pub weight: f64,
}

impl<'a> Source<'a> {
    pub fn new(name: impl Into<String>, items: &'a [MiqaItem], weight: f64) -> Self {
        Self {
            name: name.into(),
            items,
            weight,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureStats {
    pub total: usize,
    pub per_source: BTreeMap<String, usize>,
    /// Histogram of relevant-image counts per item.
    pub relevant_counts: BTreeMap<usize, usize>,
    /// Histogram of distractor counts per item.
    pub distractor_counts: BTreeMap<usize, usize>,
}

impl MixtureStats {
    pub fn of(items: &[MiqaItem]) -> Self {
        let mut s = Self {
            total: items.len(),
            ..Self::default()
        };
        for it in items {
            *s.relevant_counts.entry(it.relevant_count()).or_default() += 1;
            *s.distractor_counts.entry(it.distractor_count()).or_default() += 1;
        }
        s
    }
}

/// Draw `n` items (default: the sum of source sizes). Each draw picks a source
/// with probability proportional to its weight and takes that source's next
/// item, wrapping around when exhausted.
pub fn build_mixture(
    sources: &[Source<'_>],
    n: Option<usize>,
    seed: u64,
) -> Result<(Vec<MiqaItem>, MixtureStats), MiqaError> {
    if sources.is_empty() {
        return Err(MiqaError::Config("no sources".into()));
    }
    for s in sources {
        if s.items.is_empty() {
            return Err(MiqaError::EmptySource(s.name.clone()));
        }
        if !(s.weight.is_finite() && s.weight > 0.0) {
            return Err(MiqaError::Config(format!("source {} has weight {}", s.name, s.weight)));
        }
    }
    let n = n.unwrap_or_else(|| sources.iter().map(|s| s.items.len()).sum());
    let dist = WeightedIndex::new(sources.iter().map(|s| s.weight)).map_err(|e| MiqaError::Config(e.to_string()))?;
    let mut rng = stage_rng(seed, "miqa/mixture");
    let mut cursor = vec![0usize; sources.len()];
    let mut per_source: BTreeMap<String, usize> = sources.iter().map(|s| (s.name.clone(), 0)).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = dist.sample(&mut rng);
        let src = &sources[i];
        out.push(src.items[cursor[i] % src.items.len()].clone());
        cursor[i] += 1;
        *per_source.get_mut(&src.name).expect("seeded above") += 1;
    }
    let mut stats = MixtureStats::of(&out);
    stats.per_source = per_source;
    Ok((out, stats))
}
