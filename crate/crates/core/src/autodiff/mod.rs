//! Dense tensors and a reverse-mode tape covering the primitives used by the
//! monotone networks: affine maps, ReLU variants, negation, concatenation,
//! holdings-weighted aggregation and the mean-squared-error reduction.
//!
//! Tensors are either vectors `[features]` or row-major batches
//! `[batch, features]`; every primitive accepts both and treats a vector as a
//! batch of one.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::{
    affine, affine_signed, aggregate, concat, mixed_relu, mse, neg, relu, Tensor,
};
