use rand::Rng;
use rand_distr::StandardNormal;

use super::{Mat, NeuralError};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameters with matching gradient accumulators, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    grads: Vec<Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.grads.push(Mat::zeros(value.rows(), value.cols()));
        self.values.push(value);
        self.names.push(name);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Mat {
        &self.grads[id.0]
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Mat) -> Result<(), NeuralError> {
        self.grads[id.0].add_assign(g)
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// `p -= lr * grad` for every parameter.
    pub fn sgd_step(&mut self, lr: f64) {
        for (p, g) in self.values.iter_mut().zip(&self.grads) {
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Mat::is_finite)
    }

    pub fn total_elements(&self) -> usize {
        self.values.iter().map(|v| v.data().len()).sum()
    }
}

/// Uniform in `(-bound, bound)`.
pub fn uniform_init(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

/// Standard normal entries.
pub fn gaussian_init(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}
