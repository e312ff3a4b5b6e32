use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cluster::{Clusters, QaItem};
use super::MiqaError;
use crate::seed::stage_rng;

/// A multi-image question: the source image plus injected distractors, shuffled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiqaItem {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub images: Vec<String>,
    pub relevant: Vec<bool>,
}

impl MiqaItem {
    pub fn relevant_count(&self) -> usize {
        self.relevant.iter().filter(|&&r| r).count()
    }

    pub fn distractor_count(&self) -> usize {
        self.relevant.len() - self.relevant_count()
    }

    pub fn relevant_positions(&self) -> Vec<usize> {
        (0..self.relevant.len()).filter(|&i| self.relevant[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectOptions {
    pub min_distractors: usize,
    pub max_distractors: usize,
}

impl Default for InjectOptions {
    fn default() -> Self {
        Self {
            min_distractors: 2,
            max_distractors: 10,
        }
    }
}

impl InjectOptions {
    pub fn exactly(k: usize) -> Self {
        Self {
            min_distractors: k,
            max_distractors: k,
        }
    }
}

/// Images usable as distractors for `items[index]`: images of items in other
/// clusters, minus every image referenced by the item's own cluster.
pub fn distractor_pool(items: &[QaItem], clusters: &Clusters, index: usize) -> Vec<String> {
    let own = clusters.assignment[index];
    let blocked: BTreeSet<&str> = clusters.members[own].iter().map(|&i| items[i].image.as_str()).collect();
    let pool: BTreeSet<&str> = items
        .iter()
        .zip(&clusters.assignment)
        .filter(|(it, &c)| c != own && !blocked.contains(it.image.as_str()))
        .map(|(it, _)| it.image.as_str())
        .collect();
    pool.into_iter().map(str::to_string).collect()
}

/// Add `k ~ U{min..=max}` distractors to `items[index]` and shuffle. The
/// random stream is derived from `(seed, item id)`.
pub fn inject_distractors(
    items: &[QaItem],
    clusters: &Clusters,
    index: usize,
    opts: InjectOptions,
    seed: u64,
) -> Result<MiqaItem, MiqaError> {
    if opts.min_distractors > opts.max_distractors {
        return Err(MiqaError::Config(format!(
            "distractor range {}..={} is empty",
            opts.min_distractors, opts.max_distractors
        )));
    }
    if clusters.assignment.len() != items.len() {
        return Err(MiqaError::Config(format!(
            "clusters cover {} items, expected {}",
            clusters.assignment.len(),
            items.len()
        )));
    }
    let item = items
        .get(index)
        .ok_or_else(|| MiqaError::Config(format!("item index {index} out of range")))?;
    let mut rng = stage_rng(seed, &format!("miqa/{}", item.id));
    let k = rng.gen_range(opts.min_distractors..=opts.max_distractors);
    let pool = distractor_pool(items, clusters, index);
    if pool.len() < k {
        return Err(MiqaError::InsufficientPool {
            item: item.id.clone(),
            required: k,
            available: pool.len(),
        });
    }
    let mut images: Vec<(String, bool)> = pool.choose_multiple(&mut rng, k).map(|s| (s.clone(), false)).collect();
    images.push((item.image.clone(), true));
    images.shuffle(&mut rng);
    let (images, relevant) = images.into_iter().unzip();
    Ok(MiqaItem {
        id: item.id.clone(),
        question: item.question.clone(),
        answer: item.answer.clone(),
        images,
        relevant,
    })
}

pub fn inject_all(
    items: &[QaItem],
    clusters: &Clusters,
    opts: InjectOptions,
    seed: u64,
) -> Result<Vec<MiqaItem>, MiqaError> {
    (0..items.len())
        .map(|i| inject_distractors(items, clusters, i, opts, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miqa::cluster_by_keywords;

    fn fixture() -> (Vec<QaItem>, Clusters) {
        let words = ["dog", "bus", "kite", "cake", "sink", "boat", "tree", "clock"];
        let items: Vec<QaItem> = (0..24)
            .map(|i| {
                QaItem::new(
                    format!("q{i}"),
                    format!("img{i}"),
                    format!("Is there a {}?", words[i % 8]),
                    "yes",
                )
            })
            .collect();
        let c = cluster_by_keywords(&items, 1);
        (items, c)
    }

    #[test]
    fn forced_two_gives_three_images_one_relevant() {
        let (items, c) = fixture();
        let m = inject_distractors(&items, &c, 0, InjectOptions::exactly(2), 1).unwrap();
        assert_eq!(m.images.len(), 3);
        assert_eq!(m.relevant_count(), 1);
        assert_eq!(m.images[m.relevant_positions()[0]], "img0");
    }

    #[test]
    fn same_seed_same_item() {
        let (items, c) = fixture();
        let a = inject_distractors(&items, &c, 3, InjectOptions::default(), 9).unwrap();
        let b = inject_distractors(&items, &c, 3, InjectOptions::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn own_cluster_images_never_used() {
        let (items, c) = fixture();
        for m in inject_all(&items, &c, InjectOptions::default(), 4).unwrap() {
            let i: usize = m.id[1..].parse().unwrap();
            for (img, rel) in m.images.iter().zip(&m.relevant) {
                if !rel {
                    let j: usize = img[3..].parse().unwrap();
                    assert_ne!(c.assignment[i], c.assignment[j]);
                }
            }
        }
    }

    #[test]
    fn shared_image_is_blocked() {
        // q1 asks about the same image as q0 under a different keyword.
        let items = vec![
            QaItem::new("q0", "imgA", "Is there a dog?", "yes"),
            QaItem::new("q1", "imgA", "Is there a bus?", "yes"),
            QaItem::new("q2", "imgB", "Is there a kite?", "yes"),
            QaItem::new("q3", "imgC", "Is there a cake?", "yes"),
        ];
        let c = cluster_by_keywords(&items, 1);
        assert_eq!(distractor_pool(&items, &c, 0), vec!["imgB", "imgC"]);
    }

    #[test]
    fn small_pool_reports_counts() {
        let (items, _) = fixture();
        let err = inject_distractors(
            &items[..4],
            &cluster_by_keywords(&items[..4], 1),
            0,
            InjectOptions::exactly(5),
            0,
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "item q0 needs 5 distractors but only 3 unrelated images exist"
        );
    }
}
