//! Cross-attention visual question answering with a multimodal information
//! bottleneck, trained end to end on a small reverse-mode autodiff engine.
//!
//! The pipeline is:
//!
//! 1. [`encoders`] turn symbolic scene objects and question tokens into
//!    per-object and per-word embeddings.
//! 2. [`attention`] pools the question with self-attention, then pools the
//!    image objects with attention conditioned on the pooled question.
//! 3. [`fusion`] projects both pooled vectors, fuses them with a Hadamard
//!    product and classifies the answer.
//! 4. [`infomax`] adds a Gaussian bottleneck over the two projections with an
//!    InfoNCE mutual-information term and a symmetrized KL penalty.
//!
//! [`data`] generates the synthetic remote-sensing style question set and
//! [`train`], [`metrics`], [`ablation`] and [`checkpoint`] cover the
//! experiment workflow.

pub mod ablation;
pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod infomax;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
