//! Dense tensor arithmetic, reverse-mode autodiff, orthonormal 2-D DCT,
//! and seeded random sampling.
//!
//! Everything is 64-bit floats. All operations are pure functions of their
//! inputs plus explicit RNG state; a [`Tape`] is single-owner and reset per
//! training step.

mod dct;
mod rng;
mod sample;
mod tape;
mod tensor;

pub use dct::{dct2, idct2, DctPlan};
pub use rng::{derive_rng, stream_id, SeededRng, StreamPurpose};
pub use sample::gumbel_categorical;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{cross_entropy, cross_entropy_onehot, softmax, NumericsError, Tensor, EPS_LOG};
