use std::path::{Path, PathBuf};

use crate::neural::attention::BlockCache;
use crate::neural::layers::{sigmoid, MlpCache};
use crate::neural::params::gaussian_init;
use crate::neural::{Block, Linear, Mat, Mlp, Module, NeuralError, ParamId, ParamStore};
use crate::seed::stage_rng;

use super::RetrieverError;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Patch and query feature width.
    pub d: usize,
    /// Learned query count, i.e. tokens per compressed image.
    pub k: usize,
    pub compressor_blocks: usize,
    pub head_blocks: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    /// Width of compressed tokens and of the relevance head.
    pub d_out: usize,
}

impl ModelConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            k: 32,
            compressor_blocks: 2,
            head_blocks: 2,
            heads: 1,
            ffn_mult: 2,
            d_out: d,
        }
    }
}

#[derive(Debug, Clone)]
struct Arch {
    queries: ParamId,
    cross: Vec<Block>,
    proj: Mlp,
    query_proj: Linear,
    head: Vec<Block>,
    readout: Linear,
}

/// Learned-query compressor plus query-aware relevance head.
#[derive(Debug, Clone)]
pub struct Retriever {
    pub config: ModelConfig,
    pub params: ParamStore,
    arch: Arch,
}

pub struct CompressCache {
    cross: Vec<BlockCache>,
    proj: MlpCache,
}

pub struct HeadCache {
    n_query: usize,
    n_rows: usize,
    query: Mat,
    blocks: Vec<BlockCache>,
    row0: Mat,
}

impl Retriever {
    /// Fresh parameters drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        assert!(
            config.k >= 1 && config.d >= 1 && config.d_out >= 1,
            "model sizes must be positive"
        );
        let mut rng = stage_rng(seed, "retriever/init");
        let mut ps = ParamStore::new();
        let (d, h, m) = (config.d, config.heads, config.ffn_mult);
        let queries = ps.add("compressor.queries", gaussian_init(&mut rng, config.k, d));
        let cross = (0..config.compressor_blocks)
            .map(|i| Block::new(&mut ps, &format!("compressor.block{i}"), d, h, m, &mut rng))
            .collect();
        let proj = Mlp::new(&mut ps, "compressor.proj", d, d * m, config.d_out, &mut rng);
        let query_proj = Linear::new(&mut ps, "head.query_proj", d, config.d_out, &mut rng);
        let head = (0..config.head_blocks)
            .map(|i| Block::new(&mut ps, &format!("head.block{i}"), config.d_out, h, m, &mut rng))
            .collect();
        let readout = Linear::new(&mut ps, "head.readout", config.d_out, 1, &mut rng);
        Self {
            config,
            params: ps,
            arch: Arch {
                queries,
                cross,
                proj,
                query_proj,
                head,
                readout,
            },
        }
    }

    /// Rebuild the architecture for `config` and load `params` into it.
    pub fn from_params(config: ModelConfig, params: &ParamStore) -> Result<Self, RetrieverError> {
        let mut r = Self::new(config, 0);
        crate::neural::checkpoint::restore(&mut r.params, params)?;
        Ok(r)
    }

    /// Sidecar holding the architecture of the checkpoint at `path`.
    pub fn config_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".config.json");
        PathBuf::from(s)
    }

    /// Write the parameter checkpoint to `path` and the architecture to its sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrieverError> {
        let path = path.as_ref();
        crate::neural::checkpoint::save(&self.params, path)?;
        let cfg = serde_json::to_string_pretty(&self.config).expect("plain struct serializes");
        std::fs::write(Self::config_path(path), cfg + "\n").map_err(RetrieverError::Io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrieverError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(Self::config_path(path)).map_err(RetrieverError::Io)?;
        let config: ModelConfig =
            serde_json::from_str(&text).map_err(|e| RetrieverError::Format(format!("model config: {e}")))?;
        let params = crate::neural::checkpoint::load(path)?;
        Self::from_params(config, &params)
    }

    /// Zero the readout so every score is `sigmoid(0) = 0.5`.
    pub fn zero_readout(&mut self) {
        self.params.get_mut(self.arch.readout.w).fill(0.0);
        self.params.get_mut(self.arch.readout.b).fill(0.0);
    }

    fn check_patches(&self, patches: &Mat) -> Result<(), RetrieverError> {
        if patches.rows() == 0 || patches.cols() != self.config.d {
            return Err(NeuralError::Shape {
                op: "compress",
                left: patches.shape(),
                right: (self.config.k, self.config.d),
            }
            .into());
        }
        Ok(())
    }

    pub fn compress_cached(&self, patches: &Mat) -> Result<(Mat, CompressCache), RetrieverError> {
        self.check_patches(patches)?;
        let ps = &self.params;
        let mut x = ps.get(self.arch.queries).clone();
        let mut cross = Vec::with_capacity(self.arch.cross.len());
        for b in &self.arch.cross {
            let (y, c) = b.forward(ps, &x, patches)?;
            cross.push(c);
            x = y;
        }
        let (f, proj) = self.arch.proj.forward(ps, &x)?;
        Ok((f, CompressCache { cross, proj }))
    }

    /// `T × d` patches to `K × d_out` tokens.
    pub fn compress(&self, patches: &Mat) -> Result<Mat, RetrieverError> {
        Ok(self.compress_cached(patches)?.0)
    }

    /// Accumulates compressor gradients; returns the patch gradient.
    pub fn compress_backward(&mut self, cache: &CompressCache, d_tokens: &Mat) -> Result<Mat, RetrieverError> {
        let ps = &mut self.params;
        let mut dx = self.arch.proj.backward(ps, &cache.proj, d_tokens)?;
        let mut d_patches: Option<Mat> = None;
        for (b, c) in self.arch.cross.iter().zip(&cache.cross).rev() {
            let (dq, dkv) = b.backward(ps, c, &dx)?;
            match d_patches.as_mut() {
                Some(acc) => acc.add_assign(&dkv)?,
                None => d_patches = Some(dkv),
            }
            dx = dq;
        }
        ps.accumulate(self.arch.queries, &dx)?;
        Ok(d_patches.unwrap_or_else(|| Mat::zeros(0, self.config.d)))
    }

    /// Relevance logit for `query` (rows are query tokens) against compressed tokens.
    pub fn head_logit(&self, query: &Mat, tokens: &Mat) -> Result<(f64, HeadCache), RetrieverError> {
        let ps = &self.params;
        if query.rows() == 0 || query.cols() != self.config.d || tokens.cols() != self.config.d_out {
            return Err(NeuralError::Shape {
                op: "relevance_head",
                left: query.shape(),
                right: tokens.shape(),
            }
            .into());
        }
        let q = self.arch.query_proj.forward(ps, query)?;
        let mut x = Mat::vstack(&q, tokens)?;
        let mut blocks = Vec::with_capacity(self.arch.head.len());
        for b in &self.arch.head {
            let (y, c) = b.forward(ps, &x, &x)?;
            blocks.push(c);
            x = y;
        }
        let row0 = x.slice_rows(0, 1);
        let logit = self.arch.readout.forward(ps, &row0)?.get(0, 0);
        Ok((
            logit,
            HeadCache {
                n_query: query.rows(),
                n_rows: query.rows() + tokens.rows(),
                query: query.clone(),
                blocks,
                row0,
            },
        ))
    }

    /// Accumulates head gradients; returns `(d_query, d_tokens)`.
    pub fn head_backward(&mut self, cache: &HeadCache, d_logit: f64) -> Result<(Mat, Mat), RetrieverError> {
        let ps = &mut self.params;
        let d_row0 = self
            .arch
            .readout
            .backward(ps, &cache.row0, &Mat::from_vec(1, 1, vec![d_logit])?)?;
        let mut dx = Mat::zeros(cache.n_rows, self.config.d_out);
        dx.row_mut(0).copy_from_slice(d_row0.row(0));
        for (b, c) in self.arch.head.iter().zip(&cache.blocks).rev() {
            let (mut dq, dkv) = b.backward(ps, c, &dx)?;
            dq.add_assign(&dkv)?;
            dx = dq;
        }
        let d_q = dx.slice_rows(0, cache.n_query);
        let d_tokens = dx.slice_rows(cache.n_query, dx.rows());
        let d_query = self.arch.query_proj.backward(ps, &cache.query, &d_q)?;
        Ok((d_query, d_tokens))
    }

    /// Relevance score in (0, 1) for already compressed tokens.
    pub fn score_tokens(&self, query: &Mat, tokens: &Mat) -> Result<f64, RetrieverError> {
        Ok(sigmoid(self.head_logit(query, tokens)?.0))
    }

    /// `(F, R)`: compressed tokens and the query-aware relevance score.
    pub fn encode_image(&self, patches: &Mat, query: &Mat) -> Result<(Mat, f64), RetrieverError> {
        let f = self.compress(patches)?;
        let r = self.score_tokens(query, &f)?;
        Ok((f, r))
    }
}

/// Relevance head as a [`Module`]: inputs `[query, tokens]`, output `1×1` score.
pub struct HeadModule<'a>(pub &'a Retriever);

/// Full retriever as a [`Module`]: inputs `[patches, query]`, output `1×1` score.
pub struct RetrieverModule<'a>(pub &'a Retriever);

fn with_params(r: &Retriever, ps: &ParamStore) -> Retriever {
    Retriever {
        config: r.config.clone(),
        params: ps.clone(),
        arch: r.arch.clone(),
    }
}

fn two<'m>(inputs: &'m [Mat], op: &'static str) -> Result<(&'m Mat, &'m Mat), NeuralError> {
    match inputs {
        [a, b] => Ok((a, b)),
        _ => Err(NeuralError::Arity {
            op,
            expected: 2,
            got: inputs.len(),
        }),
    }
}

fn unwrap_neural(e: RetrieverError) -> NeuralError {
    match e {
        RetrieverError::Neural(n) => n,
        other => NeuralError::NonFinite(other.to_string()),
    }
}

impl Module for HeadModule<'_> {
    type Cache = (HeadCache, f64);

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Self::Cache), NeuralError> {
        let (query, tokens) = two(inputs, "relevance_head")?;
        let r = with_params(self.0, ps);
        let (logit, c) = r.head_logit(query, tokens).map_err(unwrap_neural)?;
        let s = sigmoid(logit);
        Ok((Mat::from_vec(1, 1, vec![s])?, (c, s)))
    }

    fn backward(&self, ps: &mut ParamStore, cache: &Self::Cache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        let mut r = with_params(self.0, ps);
        r.params.zero_grad();
        let (c, s) = cache;
        let (dq, dt) = r
            .head_backward(c, dy.get(0, 0) * s * (1.0 - s))
            .map_err(unwrap_neural)?;
        for id in ps.ids().collect::<Vec<_>>() {
            ps.accumulate(id, r.params.grad(id))?;
        }
        Ok(vec![dq, dt])
    }
}

impl Module for RetrieverModule<'_> {
    type Cache = (CompressCache, HeadCache, f64);

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Self::Cache), NeuralError> {
        let (patches, query) = two(inputs, "retriever")?;
        let r = with_params(self.0, ps);
        let (f, cc) = r.compress_cached(patches).map_err(unwrap_neural)?;
        let (logit, hc) = r.head_logit(query, &f).map_err(unwrap_neural)?;
        let s = sigmoid(logit);
        Ok((Mat::from_vec(1, 1, vec![s])?, (cc, hc, s)))
    }

    fn backward(&self, ps: &mut ParamStore, cache: &Self::Cache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        let mut r = with_params(self.0, ps);
        r.params.zero_grad();
        let (cc, hc, s) = cache;
        let (dq, dt) = r
            .head_backward(hc, dy.get(0, 0) * s * (1.0 - s))
            .map_err(unwrap_neural)?;
        let dp = r.compress_backward(cc, &dt).map_err(unwrap_neural)?;
        for id in ps.ids().collect::<Vec<_>>() {
            ps.accumulate(id, r.params.grad(id))?;
        }
        Ok(vec![dp, dq])
    }
}
