//! Dense tensors, reverse-mode differentiation, and the optimizer.

mod adam;
mod gradcheck;
mod graph;
pub mod kernels;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{analytic_gradients, compare_gradients, grad_check, relative_error, GradCheckReport, LossFn};
pub use graph::{Eager, Graph};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
