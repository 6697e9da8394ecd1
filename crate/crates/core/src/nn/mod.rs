//! Minimal differentiable computation layer: tensors, a reverse-mode tape,
//! the layers the models need, Adam, and finite-difference verification.

mod adam;
mod gradcheck;
mod layers;
mod param;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{GradCheck, GradCheckReport};
pub use layers::{GruCell, Linear, RecurrentCore, RectConv, RnnCell};
pub use param::{glorot_uniform, Gradients, ParamId, ParamStore, Parameter};
pub use tape::{Activation, Tape, Var};
pub use tensor::Tensor;
