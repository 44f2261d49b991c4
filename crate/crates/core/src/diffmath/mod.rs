//! Minimal reverse-mode differentiable computation: tensors, a recording
//! tape, dense and gated-recurrent layers, categorical helpers, Adam and
//! binary checkpoints.

pub mod checkpoint;
mod gradcheck;
mod nn;
mod optim;
mod params;
mod tape;
mod tensor;

pub use nn::{
    categorical_kl, cross_entropy_rows, floored_softmax, kl_rows, Activation, Dense, GruCell, Mlp,
    PROB_FLOOR,
};
pub use gradcheck::{gradient_check, identity as bare_params, GradCheck};
pub use optim::Adam;
pub use params::{Param, ParamId, ParameterSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
