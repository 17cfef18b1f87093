//! Tensor-train accelerated sampling with the regularized Wasserstein proximal kernel.
//!
//! The crate provides a small tensor-train toolkit (algebra, rounding, cross
//! approximation), heat-kernel operators on tensor grids, particle samplers
//! (the tensor-train proximal sampler, its Monte-Carlo variant, ULA and MALA),
//! closed-form Gaussian recursions used as ground truth, a catalogue of target
//! potentials and the experiment runner behind the `sample` binary.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod experiment;
pub mod kernel;
pub mod potentials;
pub mod samplers;
mod linalg;
pub mod oracle;
pub mod tt;

pub use nalgebra;

pub use error::{Error, Result};
pub use grid::{Grid, Scheme};
pub use tt::{KroneckerOperator, TensorTrain};
