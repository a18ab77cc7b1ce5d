//! Differentiable speaker-recognition network.
//!
//! A small reverse-mode engine specialised to one network family: every
//! layer records what its backward step needs in a [`Trace`], and
//! [`SpeakerModel::backward`] replays the layers in reverse to produce input
//! and/or parameter gradients.

pub mod checkpoint;
mod model;
pub mod ops;
pub mod sinc;
mod tensor;

pub use model::{
    cross_entropy_grad, euclidean, target_cost_grad_logits, ArchConfig, AudioChunk, DVector, Dims,
    Params, SpeakerModel, Trace, PARAM_NAMES,
};
pub use tensor::Tensor;
