use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::RetrieverError;
use crate::corpus::Corpus;
use crate::neural::Mat;
use crate::seed::{derive_seed, rng_from_seed, stage_rng};

pub const FEATURE_MAGIC: &[u8; 4] = b"VHF1";

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    pub id: String,
    /// `T × d` patch features.
    pub patches: Mat,
    /// Relevance label for the first query (0 when there are no queries).
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFeatures {
    /// Anchor label the query asks about.
    pub anchor: String,
    /// Query tokens, `rows × d`.
    pub query: Mat,
    /// One label per image, in image order: 1 iff the image contains the anchor.
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub t: usize,
    pub d: usize,
    pub images: Vec<ImageFeatures>,
    pub queries: Vec<QueryFeatures>,
}

#[derive(Debug, Clone)]
pub struct SynthFeatureParams {
    pub d: usize,
    pub t: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Query anchors; `None` means every label in the corpus.
    pub anchors: Option<Vec<String>>,
}

impl SynthFeatureParams {
    pub fn new(d: usize, t: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            d,
            t,
            noise_sigma,
            seed,
            anchors: None,
        }
    }
}

/// Prototype for `label`: d standard normal entries.
pub fn label_prototype(label: &str, d: usize, seed: u64) -> Mat {
    let mut rng = rng_from_seed(derive_seed(seed, &format!("prototype/{label}")));
    Mat::from_fn(1, d, |_, _| StandardNormal.sample(&mut rng))
}

/// Patch features for a corpus. Each image's rows are split as evenly as
/// possible across its labels (sorted order, remainder to the first labels),
/// each row set to its label's prototype; row placement is shuffled and
/// Gaussian noise added. Queries are the anchor prototypes.
pub fn synth_features(corpus: &Corpus, p: &SynthFeatureParams) -> Result<FeatureSet, RetrieverError> {
    if p.d < 8 {
        return Err(RetrieverError::Config(format!(
            "feature width d={} must be at least 8",
            p.d
        )));
    }
    if p.t == 0 {
        return Err(RetrieverError::Config("patch count T must be positive".into()));
    }
    if !(p.noise_sigma >= 0.0 && p.noise_sigma.is_finite()) {
        return Err(RetrieverError::Config(format!(
            "noise sigma {} must be finite and >= 0",
            p.noise_sigma
        )));
    }
    let protos: BTreeMap<&str, Mat> = corpus
        .label_universe()
        .iter()
        .map(|l| (l.as_str(), label_prototype(l, p.d, p.seed)))
        .collect();
    let noise = Normal::new(0.0, p.noise_sigma).expect("validated sigma");
    let anchors = match &p.anchors {
        Some(a) => a.clone(),
        None => corpus.label_universe().to_vec(),
    };

    let mut images = Vec::with_capacity(corpus.len());
    for rec in corpus.images() {
        let mut rng = stage_rng(p.seed, &format!("features/{}", rec.image_id));
        let labels: Vec<&str> = rec.object_labels.iter().map(String::as_str).collect();
        let mut slots: Vec<Option<&str>> = Vec::with_capacity(p.t);
        if labels.is_empty() {
            slots.resize(p.t, None);
        } else {
            let (base, extra) = (p.t / labels.len(), p.t % labels.len());
            for (i, l) in labels.iter().enumerate() {
                slots.extend(std::iter::repeat_n(Some(*l), base + usize::from(i < extra)));
            }
        }
        slots.shuffle(&mut rng);
        let mut patches = Mat::zeros(p.t, p.d);
        for (r, slot) in slots.iter().enumerate() {
            if let Some(l) = slot {
                patches.row_mut(r).copy_from_slice(protos[l].row(0));
            }
        }
        if p.noise_sigma > 0.0 {
            for v in patches.data_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        images.push(ImageFeatures {
            id: rec.image_id.clone(),
            patches,
            label: 0,
        });
    }

    let mut queries = Vec::with_capacity(anchors.len());
    for a in anchors {
        let query = protos
            .get(a.as_str())
            .cloned()
            .unwrap_or_else(|| label_prototype(&a, p.d, p.seed));
        let labels = corpus.images().iter().map(|r| u8::from(r.has(&a))).collect();
        queries.push(QueryFeatures {
            anchor: a,
            query,
            labels,
        });
    }
    let mut fs = FeatureSet {
        t: p.t,
        d: p.d,
        images,
        queries,
    };
    fs.sync_image_labels();
    Ok(fs)
}

impl FeatureSet {
    fn sync_image_labels(&mut self) {
        for (i, img) in self.images.iter_mut().enumerate() {
            img.label = self.queries.first().map_or(0, |q| q.labels[i]);
        }
    }

    pub fn query(&self, anchor: &str) -> Option<&QueryFeatures> {
        self.queries.iter().find(|q| q.anchor == anchor)
    }

    pub fn image_index(&self) -> BTreeMap<&str, usize> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, im)| (im.id.as_str(), i))
            .collect()
    }

    /// Mean over patch rows, `1 × d`.
    pub fn pooled(&self, image: usize) -> Mat {
        let p = &self.images[image].patches;
        p.col_sum().scale(1.0 / p.rows() as f64)
    }

    /// Layout: magic `VHF1`, u32 LE {image count, T, d}; per image: u32 id
    /// length, id bytes, `T·d` f64 LE, u8 label. Then u32 query count; per
    /// query: u32 anchor length, anchor bytes, u32 rows, `rows·d` f64 LE,
    /// one u8 label per image.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FEATURE_MAGIC);
        for n in [self.images.len(), self.t, self.d] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        let put_mat =
            |out: &mut Vec<u8>, m: &Mat| m.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        for img in &self.images {
            put_str(&mut out, &img.id);
            put_mat(&mut out, &img.patches);
            out.push(img.label);
        }
        out.extend_from_slice(&(self.queries.len() as u32).to_le_bytes());
        for q in &self.queries {
            put_str(&mut out, &q.anchor);
            out.extend_from_slice(&(q.query.rows() as u32).to_le_bytes());
            put_mat(&mut out, &q.query);
            out.extend_from_slice(&q.labels);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrieverError> {
        let mut r = Cursor { buf: bytes, pos: 0 };
        if r.take(4)? != FEATURE_MAGIC {
            return Err(RetrieverError::Format("bad magic, expected VHF1".into()));
        }
        let (n, t, d) = (r.u32()?, r.u32()?, r.u32()?);
        let mut images = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let id = r.string()?;
            let patches = r.mat(t, d)?;
            let label = r.take(1)?[0];
            images.push(ImageFeatures { id, patches, label });
        }
        let nq = r.u32()?;
        let mut queries = Vec::with_capacity(nq.min(1 << 16));
        for _ in 0..nq {
            let anchor = r.string()?;
            let rows = r.u32()?;
            let query = r.mat(rows, d)?;
            let labels = r.take(n)?.to_vec();
            queries.push(QueryFeatures { anchor, query, labels });
        }
        if r.pos != bytes.len() {
            return Err(RetrieverError::Format(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { t, d, images, queries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrieverError> {
        std::fs::write(path, self.to_bytes()).map_err(RetrieverError::Io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrieverError> {
        Self::from_bytes(&std::fs::read(path).map_err(RetrieverError::Io)?)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrieverError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| RetrieverError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, RetrieverError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn string(&mut self) -> Result<String, RetrieverError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| RetrieverError::Format("id is not utf-8".into()))
    }

    fn mat(&mut self, rows: usize, cols: usize) -> Result<Mat, RetrieverError> {
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| RetrieverError::Format("tensor size overflows".into()))?;
        let data = self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Mat::from_vec(rows, cols, data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ImageRecord;
    use crate::synth::{synthetic_corpus, SynthCorpusParams};

    fn corpus() -> Corpus {
        Corpus::from_records(vec![
            ImageRecord::new("a", ["dog", "cat"]),
            ImageRecord::new("b", ["cat", "dog"]),
            ImageRecord::new("c", ["bus"]),
            ImageRecord::new("d", Vec::<String>::new()),
        ])
        .unwrap()
    }

    #[test]
    fn noiseless_equal_label_sets_pool_equally() {
        let fs = synth_features(&corpus(), &SynthFeatureParams::new(8, 7, 0.0, 1)).unwrap();
        assert!(fs.pooled(0).max_abs_diff(&fs.pooled(1)) < 1e-15);
        assert_ne!(fs.images[0].patches, fs.images[1].patches);
        assert_eq!(fs.pooled(3).max_abs(), 0.0);
        let dog = fs.query("dog").unwrap();
        assert_eq!(dog.labels, [1, 1, 0, 0]);
        assert_eq!(fs.images[0].label, fs.queries[0].labels[0]);
    }

    #[test]
    fn bytes_roundtrip_and_determinism() {
        let p = SynthFeatureParams::new(8, 5, 0.3, 9);
        let a = synth_features(&corpus(), &p).unwrap().to_bytes();
        assert_eq!(a, synth_features(&corpus(), &p).unwrap().to_bytes());
        assert_eq!(&a[..16], b"VHF1\x04\x00\x00\x00\x05\x00\x00\x00\x08\x00\x00\x00");
        assert_eq!(FeatureSet::from_bytes(&a).unwrap().to_bytes(), a);
        assert!(FeatureSet::from_bytes(&a[..a.len() - 1]).is_err());
    }

    #[test]
    fn rejects_narrow_width() {
        assert!(matches!(
            synth_features(&corpus(), &SynthFeatureParams::new(4, 5, 0.0, 0)),
            Err(RetrieverError::Config(_))
        ));
    }

    #[test]
    fn disjoint_label_sets_are_near_orthogonal() {
        let c = synthetic_corpus(&SynthCorpusParams {
            n_images: 60,
            n_labels: 20,
            min_labels: 1,
            max_labels: 2,
            seed: 0,
        });
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..20 {
            let fs = synth_features(&c, &SynthFeatureParams::new(64, 8, 0.0, seed)).unwrap();
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    let (a, b) = (&c.images()[i].object_labels, &c.images()[j].object_labels);
                    if a.is_disjoint(b) {
                        let (x, y) = (fs.pooled(i), fs.pooled(j));
                        let dot: f64 = x.data().iter().zip(y.data()).map(|(u, v)| u * v).sum();
                        total += dot
                            / (x.data().iter().map(|v| v * v).sum::<f64>().sqrt()
                                * y.data().iter().map(|v| v * v).sum::<f64>().sqrt());
                        count += 1;
                    }
                }
            }
        }
        assert!((total / count as f64).abs() < 0.1);
    }
}
