use super::attention::{Attention, AttentionCache, Block, BlockCache};
use super::layers::{
    gelu_backward, gelu_forward, sigmoid_backward, sigmoid_forward, softmax_rows, softmax_rows_backward, LayerNorm,
    LayerNormCache, Linear, Mlp, MlpCache,
};
use super::{Mat, NeuralError, ParamStore};

/// A differentiable map from input matrices to one output matrix.
pub trait Module {
    type Cache;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Self::Cache), NeuralError>;

    /// Accumulates parameter gradients in `ps`; returns one gradient per input.
    fn backward(&self, ps: &mut ParamStore, cache: &Self::Cache, dy: &Mat) -> Result<Vec<Mat>, NeuralError>;
}

fn one_input(inputs: &[Mat], op: &'static str) -> Result<Mat, NeuralError> {
    match inputs {
        [x] => Ok(x.clone()),
        _ => Err(NeuralError::Arity {
            op,
            expected: 1,
            got: inputs.len(),
        }),
    }
}

fn two_inputs<'a>(inputs: &'a [Mat], op: &'static str) -> Result<(&'a Mat, &'a Mat), NeuralError> {
    match inputs {
        [a, b] => Ok((a, b)),
        _ => Err(NeuralError::Arity {
            op,
            expected: 2,
            got: inputs.len(),
        }),
    }
}

impl Module for Linear {
    type Cache = Mat;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Mat), NeuralError> {
        let x = one_input(inputs, "linear")?;
        Ok((Linear::forward(self, ps, &x)?, x))
    }

    fn backward(&self, ps: &mut ParamStore, x: &Mat, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![Linear::backward(self, ps, x, dy)?])
    }
}

impl Module for LayerNorm {
    type Cache = LayerNormCache;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, LayerNormCache), NeuralError> {
        LayerNorm::forward(self, ps, &one_input(inputs, "layernorm")?)
    }

    fn backward(&self, ps: &mut ParamStore, c: &LayerNormCache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![LayerNorm::backward(self, ps, c, dy)?])
    }
}

impl Module for Mlp {
    type Cache = MlpCache;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, MlpCache), NeuralError> {
        Mlp::forward(self, ps, &one_input(inputs, "mlp")?)
    }

    fn backward(&self, ps: &mut ParamStore, c: &MlpCache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![Mlp::backward(self, ps, c, dy)?])
    }
}

/// Inputs: `[queries, keys_values]`.
impl Module for Attention {
    type Cache = AttentionCache;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, AttentionCache), NeuralError> {
        let (q, kv) = two_inputs(inputs, "attention")?;
        Attention::forward(self, ps, q, kv)
    }

    fn backward(&self, ps: &mut ParamStore, c: &AttentionCache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        let (dq, dkv) = Attention::backward(self, ps, c, dy)?;
        Ok(vec![dq, dkv])
    }
}

/// Inputs: `[queries, keys_values]`.
impl Module for Block {
    type Cache = BlockCache;

    fn forward(&self, ps: &ParamStore, inputs: &[Mat]) -> Result<(Mat, BlockCache), NeuralError> {
        let (q, kv) = two_inputs(inputs, "block")?;
        Block::forward(self, ps, q, kv)
    }

    fn backward(&self, ps: &mut ParamStore, c: &BlockCache, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        let (dq, dkv) = Block::backward(self, ps, c, dy)?;
        Ok(vec![dq, dkv])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Gelu;

#[derive(Debug, Clone, Copy)]
pub struct Sigmoid;

/// Row-wise softmax.
#[derive(Debug, Clone, Copy)]
pub struct Softmax;

impl Module for Gelu {
    type Cache = Mat;

    fn forward(&self, _: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Mat), NeuralError> {
        let x = one_input(inputs, "gelu")?;
        Ok((gelu_forward(&x), x))
    }

    fn backward(&self, _: &mut ParamStore, x: &Mat, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![gelu_backward(x, dy)?])
    }
}

impl Module for Sigmoid {
    type Cache = Mat;

    fn forward(&self, _: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Mat), NeuralError> {
        let x = one_input(inputs, "sigmoid")?;
        Ok((sigmoid_forward(&x), x))
    }

    fn backward(&self, _: &mut ParamStore, x: &Mat, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![sigmoid_backward(x, dy)?])
    }
}

impl Module for Softmax {
    type Cache = Mat;

    fn forward(&self, _: &ParamStore, inputs: &[Mat]) -> Result<(Mat, Mat), NeuralError> {
        let p = softmax_rows(&one_input(inputs, "softmax")?);
        Ok((p.clone(), p))
    }

    fn backward(&self, _: &mut ParamStore, p: &Mat, dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
        Ok(vec![softmax_rows_backward(p, dy)?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest absolute discrepancy, e.g.
    /// `param block.attn.q.w[3]` or `input 1[0]`.
    pub worst: String,
    pub coordinates: usize,
}

pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Max-norm relative error `max|a - n| / max(max|a|, max|n|, 1e-8)`, taken
/// over every checked coordinate.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let mut acc = Accum::default();
    for (&a, &n) in analytic.iter().zip(numeric) {
        acc.push(a, n, String::new);
    }
    acc.max_diff / acc.max_mag.max(REL_ERROR_FLOOR)
}

#[derive(Default)]
struct Accum {
    max_diff: f64,
    max_mag: f64,
    worst: String,
    n: usize,
}

impl Accum {
    fn push(&mut self, a: f64, n: f64, at: impl FnOnce() -> String) {
        let d = (a - n).abs();
        if d > self.max_diff || self.n == 0 {
            self.max_diff = self.max_diff.max(d);
            self.worst = at();
        }
        self.max_mag = self.max_mag.max(a.abs()).max(n.abs());
        self.n += 1;
    }
}

fn probe_loss<M: Module>(m: &M, ps: &ParamStore, inputs: &[Mat], coeff: &Mat) -> Result<f64, NeuralError> {
    let (y, _) = m.forward(ps, inputs)?;
    let l = y.hadamard(coeff)?.sum();
    if !l.is_finite() {
        return Err(NeuralError::NonFinite("probe loss".into()));
    }
    Ok(l)
}

/// Compare analytic gradients of `sum(coeff ⊙ m(inputs))` against central
/// differences for every parameter and input coordinate.
pub fn grad_check<M: Module>(
    m: &M,
    ps: &mut ParamStore,
    inputs: &[Mat],
    coeff: &Mat,
    eps: f64,
) -> Result<GradCheckReport, NeuralError> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(NeuralError::InvalidEps(eps));
    }
    ps.zero_grad();
    let (y, cache) = m.forward(ps, inputs)?;
    if y.shape() != coeff.shape() {
        return Err(NeuralError::Shape {
            op: "grad_check",
            left: y.shape(),
            right: coeff.shape(),
        });
    }
    if !y.is_finite() {
        return Err(NeuralError::NonFinite("forward output".into()));
    }
    let input_grads = m.backward(ps, &cache, coeff)?;

    let mut acc = Accum::default();
    let ids: Vec<_> = ps.ids().collect();
    for id in ids {
        for i in 0..ps.get(id).data().len() {
            let orig = ps.get(id).data()[i];
            ps.get_mut(id).data_mut()[i] = orig + eps;
            let lp = probe_loss(m, ps, inputs, coeff)?;
            ps.get_mut(id).data_mut()[i] = orig - eps;
            let lm = probe_loss(m, ps, inputs, coeff)?;
            ps.get_mut(id).data_mut()[i] = orig;
            let at = || format!("param {}[{i}]", ps.name(id));
            acc.push(ps.grad(id).data()[i], (lp - lm) / (2.0 * eps), at);
        }
    }
    let mut work = inputs.to_vec();
    for (j, g) in input_grads.iter().enumerate() {
        for i in 0..work[j].data().len() {
            let orig = work[j].data()[i];
            work[j].data_mut()[i] = orig + eps;
            let lp = probe_loss(m, ps, &work, coeff)?;
            work[j].data_mut()[i] = orig - eps;
            let lm = probe_loss(m, ps, &work, coeff)?;
            work[j].data_mut()[i] = orig;
            acc.push(g.data()[i], (lp - lm) / (2.0 * eps), || format!("input {j}[{i}]"));
        }
    }
    let report = GradCheckReport {
        max_rel_error: acc.max_diff / acc.max_mag.max(REL_ERROR_FLOOR),
        worst: acc.worst,
        coordinates: acc.n,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::gaussian_init;
    use crate::seed::rng_from_seed;

    #[test]
    fn linear_d4() {
        let mut rng = rng_from_seed(10);
        let mut ps = ParamStore::new();
        let lin = Linear::new(&mut ps, "l", 4, 4, &mut rng);
        let x = gaussian_init(&mut rng, 3, 4);
        let c = gaussian_init(&mut rng, 3, 4);
        let r = grad_check(&lin, &mut ps, &[x], &c, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.coordinates, 16 + 4 + 12);
    }

    #[test]
    fn block_d8() {
        let mut rng = rng_from_seed(11);
        let mut ps = ParamStore::new();
        let b = Block::new(&mut ps, "b", 8, 2, 2, &mut rng);
        let q = gaussian_init(&mut rng, 3, 8);
        let kv = gaussian_init(&mut rng, 5, 8);
        let c = gaussian_init(&mut rng, 3, 8);
        let r = grad_check(&b, &mut ps, &[q, kv], &c, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn eps_and_shape_preconditions() {
        let mut ps = ParamStore::new();
        let x = Mat::zeros(1, 2);
        assert!(matches!(
            grad_check(&Gelu, &mut ps, std::slice::from_ref(&x), &x, 1e-2),
            Err(NeuralError::InvalidEps(_))
        ));
        assert!(matches!(
            grad_check(&Gelu, &mut ps, &[x], &Mat::zeros(2, 2), 1e-5),
            Err(NeuralError::Shape { .. })
        ));
    }

    #[test]
    fn broken_gradient_is_detected() {
        struct Wrong;
        impl Module for Wrong {
            type Cache = ();
            fn forward(&self, _: &ParamStore, inputs: &[Mat]) -> Result<(Mat, ()), NeuralError> {
                Ok((inputs[0].map(|v| v * v), ()))
            }
            fn backward(&self, _: &mut ParamStore, _: &(), dy: &Mat) -> Result<Vec<Mat>, NeuralError> {
                Ok(vec![dy.clone()])
            }
        }
        let x = Mat::from_vec(1, 2, vec![1.5, -0.5]).unwrap();
        let r = grad_check(
            &Wrong,
            &mut ParamStore::new(),
            &[x],
            &Mat::from_fn(1, 2, |_, _| 1.0),
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error > 0.1);
    }
}
