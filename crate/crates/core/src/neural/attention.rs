use rand::Rng;

use super::layers::{softmax_rows, softmax_rows_backward, LayerNorm, LayerNormCache, Linear, Mlp, MlpCache};
use super::{Mat, NeuralError, ParamStore};

/// Scaled dot-product attention with `heads` heads splitting the model width.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub d: usize,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    q_in: Mat,
    kv_in: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    /// Attention weights per head, `K × T`.
    pub probs: Vec<Mat>,
    concat: Mat,
}

impl Attention {
    pub fn new(ps: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut impl Rng) -> Self {
        assert!(
            heads >= 1 && d.is_multiple_of(heads),
            "model width {d} not divisible by {heads} heads"
        );
        Self {
            wq: Linear::new(ps, &format!("{name}.q"), d, d, rng),
            wk: Linear::new(ps, &format!("{name}.k"), d, d, rng),
            wv: Linear::new(ps, &format!("{name}.v"), d, d, rng),
            wo: Linear::new(ps, &format!("{name}.o"), d, d, rng),
            d,
            heads,
        }
    }

    /// Set all four projections to identity with zero bias.
    pub fn set_identity(&self, ps: &mut ParamStore) {
        for lin in [self.wq, self.wk, self.wv, self.wo] {
            *ps.get_mut(lin.w) = Mat::identity(self.d);
            ps.get_mut(lin.b).fill(0.0);
        }
    }

    fn check(&self, queries: &Mat, kv: &Mat) -> Result<(), NeuralError> {
        if queries.cols() != self.d || kv.cols() != self.d || queries.rows() == 0 || kv.rows() == 0 {
            return Err(NeuralError::Shape {
                op: "attention",
                left: queries.shape(),
                right: kv.shape(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, ps: &ParamStore, queries: &Mat, kv: &Mat) -> Result<(Mat, AttentionCache), NeuralError> {
        self.check(queries, kv)?;
        let q = self.wq.forward(ps, queries)?;
        let k = self.wk.forward(ps, kv)?;
        let v = self.wv.forward(ps, kv)?;
        let dh = self.d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut concat = Mat::zeros(queries.rows(), self.d);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * dh, (h + 1) * dh);
            let (qh, kh, vh) = (q.slice_cols(a, b), k.slice_cols(a, b), v.slice_cols(a, b));
            let p = softmax_rows(&qh.matmul_t(&kh)?.scale(scale));
            concat.set_cols(a, &p.matmul(&vh)?);
            probs.push(p);
        }
        let out = self.wo.forward(ps, &concat)?;
        Ok((
            out,
            AttentionCache {
                q_in: queries.clone(),
                kv_in: kv.clone(),
                q,
                k,
                v,
                probs,
                concat,
            },
        ))
    }

    /// Returns `(d_queries, d_kv)`.
    pub fn backward(&self, ps: &mut ParamStore, c: &AttentionCache, dy: &Mat) -> Result<(Mat, Mat), NeuralError> {
        let dconcat = self.wo.backward(ps, &c.concat, dy)?;
        let dh = self.d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Mat::zeros(c.q.rows(), self.d);
        let mut dk = Mat::zeros(c.k.rows(), self.d);
        let mut dv = Mat::zeros(c.v.rows(), self.d);
        for h in 0..self.heads {
            let (a, b) = (h * dh, (h + 1) * dh);
            let p = &c.probs[h];
            let dout = dconcat.slice_cols(a, b);
            let vh = c.v.slice_cols(a, b);
            dv.set_cols(a, &p.t_matmul(&dout)?);
            let dp = dout.matmul_t(&vh)?;
            let ds = softmax_rows_backward(p, &dp)?.scale(scale);
            dq.set_cols(a, &ds.matmul(&c.k.slice_cols(a, b))?);
            dk.set_cols(a, &ds.t_matmul(&c.q.slice_cols(a, b))?);
        }
        let d_queries = self.wq.backward(ps, &c.q_in, &dq)?;
        let mut d_kv = self.wk.backward(ps, &c.kv_in, &dk)?;
        d_kv.add_assign(&self.wv.backward(ps, &c.kv_in, &dv)?)?;
        Ok((d_queries, d_kv))
    }
}

/// Post-LN transformer block:
/// `h = LN1(q + Attn(q, kv))`, `y = LN2(h + MLP(h))`.
/// Self-attention passes the same matrix as `q` and `kv`.
#[derive(Debug, Clone, Copy)]
pub struct Block {
    pub attn: Attention,
    pub ln1: LayerNorm,
    pub mlp: Mlp,
    pub ln2: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    attn: AttentionCache,
    ln1: LayerNormCache,
    mlp: MlpCache,
    ln2: LayerNormCache,
}

impl Block {
    pub fn new(ps: &mut ParamStore, name: &str, d: usize, heads: usize, ffn_mult: usize, rng: &mut impl Rng) -> Self {
        Self {
            attn: Attention::new(ps, &format!("{name}.attn"), d, heads, rng),
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), d),
            mlp: Mlp::new(ps, &format!("{name}.mlp"), d, d * ffn_mult, d, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), d),
        }
    }

    pub fn forward(&self, ps: &ParamStore, q: &Mat, kv: &Mat) -> Result<(Mat, BlockCache), NeuralError> {
        let (a, attn) = self.attn.forward(ps, q, kv)?;
        let (h, ln1) = self.ln1.forward(ps, &q.add(&a)?)?;
        let (m, mlp) = self.mlp.forward(ps, &h)?;
        let (y, ln2) = self.ln2.forward(ps, &h.add(&m)?)?;
        Ok((y, BlockCache { attn, ln1, mlp, ln2 }))
    }

    /// Returns `(d_q, d_kv)`.
    pub fn backward(&self, ps: &mut ParamStore, c: &BlockCache, dy: &Mat) -> Result<(Mat, Mat), NeuralError> {
        let dsum2 = self.ln2.backward(ps, &c.ln2, dy)?;
        let mut dh = self.mlp.backward(ps, &c.mlp, &dsum2)?;
        dh.add_assign(&dsum2)?;
        let dsum1 = self.ln1.backward(ps, &c.ln1, &dh)?;
        let (mut dq, dkv) = self.attn.backward(ps, &c.attn, &dsum1)?;
        dq.add_assign(&dsum1)?;
        Ok((dq, dkv))
    }
}
