//! Two-way quadratically constrained adversarial channel laboratory.
//!
//! Alice and Bob exchange lattice codewords over a shared medium; James sees
//! the sum `z = x_A + x_B` and adds a power-limited jamming vector `s`. Each
//! user subtracts its own codeword and decodes the other. The crate provides
//! the codes, the jammers, the estimation-based decoder, closed-form bounds
//! and Monte Carlo machinery to check geometric claims at finite blocklength.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod bounds;
pub mod codebook;
pub mod decoder;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod linalg;
pub mod sim;

pub use error::{Error, Result};
