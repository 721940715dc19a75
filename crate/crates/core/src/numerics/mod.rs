//! Dense tensors, define-by-run reverse-mode gradients, layers and AdamW.

mod graph;
pub(crate) mod linalg;
pub mod nn;
mod optim;
mod params;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use linalg::interp_matrix;
pub use optim::{adam_step, AdamState, AdamWConfig};
pub use params::{Init, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

