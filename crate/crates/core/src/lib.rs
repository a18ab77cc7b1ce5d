//! Model-inversion attacks against a differentiable speaker recognizer.
//!
//! The crate trains a small SincNet-style speaker-identification network on
//! a deterministic synthetic corpus and then reconstructs class
//! representatives from it by gradient descent on the input:
//!
//! - [`inversion::standard_mi`]: gradient descent on `c(x) = 1 - p_t` with
//!   patience and threshold stopping,
//! - [`inversion::sliding_mi`]: overlapping windows of a long signal inverted
//!   one after another, each seeded with the previous result,
//! - [`inversion::dvector_mi`]: the same descent run on the classifier head
//!   only, recovering speaker embeddings.
//!
//! [`init_zoo`] produces the starting vectors, [`eval`] measures how well
//! the inversions fool the model and what they leak, and [`cli`] ties it all
//! into reproducible experiment runs.

pub mod cli;
pub mod corpus;
pub mod diffnet;
pub mod error;
pub mod eval;
pub mod init_zoo;
pub mod inversion;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
