//! Dense f64 matrices with hand-written forward/backward passes and a
//! central-difference gradient checker.

pub mod attention;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod params;
mod tensor;

pub use attention::{Attention, Block};
pub use gradcheck::{grad_check, GradCheckReport, Module};
pub use layers::{gelu, sigmoid, softmax_rows, LayerNorm, Linear, Mlp};
pub use params::{ParamId, ParamStore};
pub use tensor::Mat;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} takes {expected} input(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    InvalidEps(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
