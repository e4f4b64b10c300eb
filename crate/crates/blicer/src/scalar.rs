//! Scalar abstraction: the whole library is generic over the floating-point
//! type used for embeddings, similarity scores and model parameters.
//!
//! `f64` is the reference precision (the CLI and the test suite use it);
//! `f32` halves the memory footprint of large embedding matrices.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};
use std::fmt;

/// Floating-point scalar usable throughout the library.
///
/// Implemented for `f32` and `f64`. The bit-level accessors exist so model
/// checkpoints round-trip exactly.
pub trait Scalar:
    Float
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + fmt::Display
    + fmt::Debug
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Width of the raw representation in bytes (4 or 8).
    const BYTES: usize;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Raw bits widened to `u64` (checkpoint serialization).
    fn to_bits_u64(self) -> u64;
    fn from_bits_u64(bits: u64) -> Self;

    fn half() -> Self {
        Self::from_f64(0.5)
    }
    fn two() -> Self {
        Self::from_f64(2.0)
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }
    fn from_bits_u64(bits: u64) -> Self {
        f32::from_bits(bits as u32)
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
    fn from_bits_u64(bits: u64) -> Self {
        f64::from_bits(bits)
    }
}
