//! Bilingual lexicon induction with cross-encoder reranking.
//!
//! The library covers the full retrieve-and-rerank pipeline for word
//! translation:
//!
//! 1. [`embed`] — load, trim and unit-normalize monolingual word vectors.
//! 2. [`clwe`] — align the two spaces with an orthogonal Procrustes map and
//!    score/retrieve translation candidates with CSLS.
//! 3. [`lexicon`] — parse seed dictionaries, augment them with high-confidence
//!    silver pairs, mine margin-based hard negatives, and assemble polarised
//!    training sets (forward + reversed, with positive repetition).
//! 4. [`crossenc`] — render word-pair templates, tokenize at character level,
//!    and train a small transformer cross-encoder with a binary cross-entropy
//!    objective; or delegate scoring to an external process.
//! 5. [`rerank`] — retrieve CSLS candidates, score them with the
//!    cross-encoder, and mix the two signals by linear interpolation.
//! 6. [`eval`] — P@1 / P@5 / MRR plus a seeded synthetic benchmark.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! type aliases below fix the default `f64` precision used by the CLI.

pub mod clwe;
pub mod crossenc;
pub mod embed;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod rerank;
pub mod scalar;

pub use error::{Error, Result, Side};
pub use scalar::Scalar;

/// Default-precision aliases (the CLI pipeline runs in `f64`).
pub type EmbeddingSpace = embed::EmbeddingSpace<f64>;
pub type LinearMap = clwe::LinearMap<f64>;
pub type CslsScorer<'a> = clwe::CslsScorer<'a, f64>;
pub type CrossEncoder = crossenc::model::CrossEncoder<f64>;
pub type CrossEncoderScorer = crossenc::CrossEncoderScorer<f64>;
pub type TrainingSet = lexicon::TrainingSet<f64>;
pub type RankedPrediction = rerank::RankedPrediction<f64>;

/// Single-precision aliases for memory-bound embedding workloads.
pub type EmbeddingSpace32 = embed::EmbeddingSpace<f32>;
pub type CslsScorer32<'a> = clwe::CslsScorer<'a, f32>;
