//! Minimal deterministic dense-network engine.
//!
//! Dense layers with exact backward passes, the losses used by the pipeline,
//! dropout, Adam, labelled RNG streams, and a finite-difference checker used
//! throughout the test suites.

mod adam;
pub mod dense;
mod early_stop;
pub mod gradcheck;
mod ops;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState, WeightDecay};
pub use dense::{dense_backward, dense_forward, Activation, DenseCache, DenseGrads, DenseLayer, LayerStack};
pub use early_stop::{EarlyStopping, Goal, Verdict};
pub use gradcheck::grad_check;
pub use ops::{bce_with_logits, dropout, mse_loss, sigmoid};
pub use rng::{derive_seed, RngStream};
