//! Minimal differentiable engine: tensors, convolution and dense kernels,
//! a reverse-mode tape and an Adam optimizer.

mod adam;
mod gradcheck;
mod ops;
mod param;
mod real;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheck, GradCheckReport};
pub use ops::{activation, conv2d, conv_transpose2d, conv_transpose2d_sized, dense, symmetrize_tensor, Activation};
pub use param::{Bound, Param, ParamSet};
pub use real::Real;
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::Tensor;
