//! Reverse-mode automatic differentiation over dense tensors.

mod adam;
mod conv;
mod graph;
pub mod gradcheck;
mod tensor;

pub use adam::AdamState;
pub use conv::ConvGeom;
pub use graph::{Grads, Graph, ParamId, ParamStore, Parameter, Var};
pub use tensor::{Real, Tensor};

use crate::rng::SplitMix64;

/// Uniform(−s, s) weights with s = sqrt(1 / (c_in·k·k)).
pub fn init_uniform<T: Real>(shape: &[usize], c_in: usize, kernel: usize, rng: &mut SplitMix64) -> Tensor<T> {
    let s = (1.0 / (c_in * kernel * kernel) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::of(rng.uniform(-s, s)))
}
