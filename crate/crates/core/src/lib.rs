//! Unsupervised domain-adaptive binary segmentation on a synthetic
//! domain-shift benchmark.
//!
//! A shared encoder feeds two decoders: a skip-connected segmentation
//! decoder trained with source labels, and a skip-free reconstruction
//! decoder trained on both domains. Two fully convolutional discriminators
//! (one on the prediction map, one on the final decoder feature) drive
//! adversarial alignment of the target domain. Training, evaluation, and
//! the synthetic data pipeline are all deterministic for a given seed.

pub mod config;
pub mod datapipe;
pub mod digest;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kv;
pub mod losses;
pub mod nets;
pub mod par;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
