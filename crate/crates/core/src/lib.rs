//! Adam-family optimizers with decoupled Huber weight decay.
//!
//! The crate is organized bottom-up:
//!
//! - [`regularizer`]: the Huber penalty, its clipping gradient and the summed regularizer.
//! - [`proximal`]: the closed-form proximal map of the scaled Huber penalty.
//! - [`threshold`]: per-tensor breakpoint policies (fixed, mean magnitude, EMA).
//! - [`optim`]: Adam, AdamW, AdamHD (Euler and proximal forms) and Lion, with parameter
//!   groups, global-norm clipping and a warmup + cosine learning-rate schedule.
//! - [`oracle`]: brute-force verifiers that share no code with the modules above.
//! - [`models`]: toy differentiable problems with hand-written gradients.
//! - [`harness`]: the experiment runner, metrics, pruning sparsity and matched-loss comparison.

pub mod config;
pub mod error;
pub mod harness;
pub mod models;
pub mod optim;
pub mod oracle;
pub mod proximal;
pub mod regularizer;
pub mod rng;
pub mod tensor;
pub mod threshold;

pub use error::{Error, Result};
pub use tensor::ParamTensor;
