use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::keywords::keywords;

/// A single-image question with its extracted keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub image: String,
    pub question: String,
    pub answer: String,
    #[serde(skip)]
    pub keywords: BTreeSet<String>,
}

impl QaItem {
    pub fn new(
        id: impl Into<String>,
        image: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        let question = question.into();
        Self {
            id: id.into(),
            image: image.into(),
            keywords: keywords(&question),
            question,
            answer: answer.into(),
        }
    }

    /// Recompute keywords, e.g. after deserialization.
    pub fn refresh_keywords(&mut self) {
        self.keywords = keywords(&self.question);
    }
}

/// Connected components of the keyword-overlap graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clusters {
    /// Cluster index for each item.
    pub assignment: Vec<usize>,
    /// Item indices per cluster, ascending. Clusters are ordered by their first member.
    pub members: Vec<Vec<usize>>,
}

impl Clusters {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Link items sharing at least `min_overlap` keywords and return the
/// connected components. `min_overlap == 0` links everything.
pub fn cluster_by_keywords(items: &[QaItem], min_overlap: usize) -> Clusters {
    let n = items.len();
    let mut uf = UnionFind((0..n).collect());
    if min_overlap == 0 {
        for i in 1..n {
            uf.union(0, i);
        }
    } else {
        let mut postings: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, it) in items.iter().enumerate() {
            for k in &it.keywords {
                postings.entry(k.as_str()).or_default().push(i);
            }
        }
        if min_overlap == 1 {
            for list in postings.values() {
                for &j in &list[1..] {
                    uf.union(list[0], j);
                }
            }
        } else {
            let mut shared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for list in postings.values() {
                for (a, &i) in list.iter().enumerate() {
                    for &j in &list[a + 1..] {
                        *shared.entry((i, j)).or_default() += 1;
                    }
                }
            }
            for ((i, j), c) in shared {
                if c >= min_overlap {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut root_to_cluster = BTreeMap::new();
    let mut assignment = Vec::with_capacity(n);
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        let c = *root_to_cluster.entry(r).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[c].push(i);
        assignment.push(c);
    }
    Clusters { assignment, members }
}
