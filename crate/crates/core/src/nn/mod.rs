//! From-scratch layers with hand-written backward passes and the four
//! forecasting architectures built from them.
//!
//! Parameters live in one flat buffer ([`ParamStore`]) so the optimizer and
//! gradient clipping can treat them as a single vector; names and shapes are
//! fixed by the [`ModelSpec`].

mod checkpoint;
pub mod gradcheck;
mod gemm;
pub mod layers;
mod model;
mod params;
mod spec;
mod tensor;

use thiserror::Error;

pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_FORMAT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{model_backward, model_backward_raw, model_forward, model_forward_raw, predict, ForwardCache};
pub use params::{init_model, Gradients, ParamEntry, ParamLayout, ParamStore};
pub use spec::{ModelKind, ModelSpec, CONV_KERNEL, DENSE_HIDDEN, POOL_SIZE, RECURRENT_HIDDEN};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
