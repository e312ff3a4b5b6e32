use rand::Rng;

use super::params::uniform_init;
use super::{Mat, NeuralError, ParamId, ParamStore};

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// 1/sqrt(2*pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub const LAYERNORM_EPS: f64 = 1e-5;

/// Exact GELU: `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * INV_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn gelu_forward(x: &Mat) -> Mat {
    x.map(gelu)
}

pub fn gelu_backward(x: &Mat, dy: &Mat) -> Result<Mat, NeuralError> {
    x.map(gelu_grad).hadamard(dy)
}

pub fn sigmoid_forward(x: &Mat) -> Mat {
    x.map(sigmoid)
}

pub fn sigmoid_backward(x: &Mat, dy: &Mat) -> Result<Mat, NeuralError> {
    x.map(sigmoid_grad).hadamard(dy)
}

/// Row-wise softmax.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Gradient through a row softmax given its output `p`.
pub fn softmax_rows_backward(p: &Mat, dy: &Mat) -> Result<Mat, NeuralError> {
    let pd = p.hadamard(dy)?;
    let mut dx = pd.clone();
    for r in 0..p.rows() {
        let dot: f64 = pd.row(r).iter().sum();
        for (d, &pv) in dx.row_mut(r).iter_mut().zip(p.row(r)) {
            *d -= pv * dot;
        }
    }
    Ok(dx)
}

/// `y = x W + b` with `W: in × out`, `b: 1 × out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(ps: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        let w = ps.add(format!("{name}.w"), uniform_init(rng, d_in, d_out, bound));
        let b = ps.add(format!("{name}.b"), Mat::zeros(1, d_out));
        Self { w, b, d_in, d_out }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> Result<Mat, NeuralError> {
        x.matmul(ps.get(self.w))?.add_row(ps.get(self.b))
    }

    /// Accumulates parameter gradients; returns `dx`.
    pub fn backward(&self, ps: &mut ParamStore, x: &Mat, dy: &Mat) -> Result<Mat, NeuralError> {
        let dw = x.t_matmul(dy)?;
        ps.accumulate(self.w, &dw)?;
        ps.accumulate(self.b, &dy.col_sum())?;
        dy.matmul_t(ps.get(self.w))
    }
}

/// Per-row normalization with learned gain and bias.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub d: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, d: usize) -> Self {
        let gamma = ps.add(format!("{name}.gamma"), Mat::from_fn(1, d, |_, _| 1.0));
        let beta = ps.add(format!("{name}.beta"), Mat::zeros(1, d));
        Self { gamma, beta, d }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> Result<(Mat, LayerNormCache), NeuralError> {
        let gamma = ps.get(self.gamma);
        if x.cols() != gamma.cols() {
            return Err(NeuralError::Shape {
                op: "layernorm",
                left: x.shape(),
                right: gamma.shape(),
            });
        }
        let beta = ps.get(self.beta);
        let n = x.cols() as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = xhat.row_mut(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LAYERNORM_EPS).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv_std.push(is);
        }
        let y = Mat::from_fn(x.rows(), x.cols(), |r, c| {
            xhat.get(r, c) * gamma.data()[c] + beta.data()[c]
        });
        Ok((y, LayerNormCache { xhat, inv_std }))
    }

    pub fn backward(&self, ps: &mut ParamStore, cache: &LayerNormCache, dy: &Mat) -> Result<Mat, NeuralError> {
        let xhat = &cache.xhat;
        ps.accumulate(self.gamma, &dy.hadamard(xhat)?.col_sum())?;
        ps.accumulate(self.beta, &dy.col_sum())?;
        let gamma = ps.get(self.gamma);
        let n = xhat.cols() as f64;
        let mut dx = Mat::zeros(xhat.rows(), xhat.cols());
        for r in 0..xhat.rows() {
            let dxhat: Vec<f64> = dy.row(r).iter().zip(gamma.data()).map(|(d, g)| d * g).collect();
            let mean_d = dxhat.iter().sum::<f64>() / n;
            let mean_dx = dxhat.iter().zip(xhat.row(r)).map(|(d, x)| d * x).sum::<f64>() / n;
            for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                *o = cache.inv_std[r] * (dxhat[c] - mean_d - xhat.get(r, c) * mean_dx);
            }
        }
        Ok(dx)
    }
}

/// `Linear -> GELU -> Linear`.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    x: Mat,
    pre: Mat,
    act: Mat,
}

impl Mlp {
    pub fn new(ps: &mut ParamStore, name: &str, d_in: usize, hidden: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            fc1: Linear::new(ps, &format!("{name}.fc1"), d_in, hidden, rng),
            fc2: Linear::new(ps, &format!("{name}.fc2"), hidden, d_out, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Mat) -> Result<(Mat, MlpCache), NeuralError> {
        let pre = self.fc1.forward(ps, x)?;
        let act = gelu_forward(&pre);
        let y = self.fc2.forward(ps, &act)?;
        Ok((y, MlpCache { x: x.clone(), pre, act }))
    }

    pub fn backward(&self, ps: &mut ParamStore, cache: &MlpCache, dy: &Mat) -> Result<Mat, NeuralError> {
        let dact = self.fc2.backward(ps, &cache.act, dy)?;
        let dpre = gelu_backward(&cache.pre, &dact)?;
        self.fc1.backward(ps, &cache.x, &dpre)
    }
}
