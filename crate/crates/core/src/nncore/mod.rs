//! Minimal neural-network substrate: a named parameter store with
//! deterministic initialization, hand-written layer forward/backward
//! passes, Adam, and a finite-difference gradient checker. Everything is
//! f64 and single-threaded so results are reproducible bit for bit.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod ops;
pub mod params;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use ops::{log_softmax, nll_loss, softmax};
pub use params::{LayerKind, LayerSpec, ParamEntry, ParameterStore, STORE_FORMAT_VERSION};
