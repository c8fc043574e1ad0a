//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::finite_diff_check;
pub use params::{flatten_grads, flatten_tensors, ParamEntry, ParamLayout, ParamVector};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

pub(crate) use tape::sigmoid;
