use super::{RetrieverConfig, RetrieverError};

/// Indices with score >= threshold, by descending score then ascending
/// index, truncated at the cap. With nothing above threshold, the single
/// highest-scoring index (lowest index among ties).
pub fn filter(scores: &[f64], config: &RetrieverConfig) -> Result<Vec<usize>, RetrieverError> {
    if scores.is_empty() {
        return Err(RetrieverError::EmptyScores);
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(RetrieverError::Config(format!("score {bad} outside [0, 1]")));
    }
    let mut keep: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= config.threshold).collect();
    if keep.is_empty() {
        let best = (0..scores.len())
            .reduce(|b, i| if scores[i] > scores[b] { i } else { b })
            .expect("non-empty");
        return Ok(vec![best]);
    }
    keep.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    if let Some(cap) = config.top_k_cap {
        keep.truncate(cap);
    }
    Ok(keep)
}

/// Downstream context size for the retained images.
pub fn context_tokens(retained: usize, tokens_per_image: usize) -> usize {
    retained * tokens_per_image
}
