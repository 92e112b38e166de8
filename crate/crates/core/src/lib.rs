//! Core library for a two-track affect modeling toolkit: essay-level
//! empathy/distress regression on top of fine-tuned text encoders, and
//! emotion prediction via constrained label generation with a small
//! encoder-decoder. All numerics are f64 and deterministic given a seed.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod nncore;
pub mod parallel;
pub mod regressors;
pub mod textenc;
pub mod track1;
pub mod track2;

pub use error::{Error, Result};

/// Salt mixed into training-loop shuffle seeds so they never collide with
/// the parameter-init stream drawn from the same user seed.
pub(crate) const SHUFFLE_SALT: u64 = 0x7368_7566;
