//! Hardware-aware shaping of dense embeddings into low-bit, low-dimension
//! codes for compute-in-memory retrieval, plus a crossbar simulator and an
//! evaluation harness to measure what survives.
//!
//! The pipeline runs `compression head → device noise → quantization head`
//! and is trained with a contrastive objective over dropout views plus a
//! reconstruction term. See the guide in `book/` for a walkthrough.

pub mod baselines;
pub mod cimsim;
pub mod error;
pub mod numkit;
pub mod retrieval;
pub mod shaping;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
