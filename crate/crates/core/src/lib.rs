//! Sparse tensor completion with side information.
//!
//! A `t`-order tensor observed on an ultra-sparse random set of entries is
//! collapsed into `n × n` matrices by weight-averaging every mode except a
//! chosen pair. Breadth-first neighbourhoods of the resulting bipartite data
//! graph give per-mode distance estimates between latent coordinates, and a
//! threshold-kernel nearest-neighbour average over a held-out sample
//! reconstructs every entry.
//!
//! The crate is `no_std` (it needs `alloc`). All file formats, the experiment
//! harness and the command line live in the companion `stc` crate.
//!
//! Module map:
//!
//! - [`tensor_model`]: shapes, low-rank generative models, sampling, sample
//!   splitting, weight vectors and planted 3-XOR instances.
//! - [`collapse`]: weighted collapse of observations into a partially observed
//!   matrix, and the induced observation density.
//! - [`spectral_distance`]: data graph, BFS neighbourhood vectors and the
//!   pairwise distance statistic.
//! - [`nn_estimator`]: bandwidth rule, threshold kernel and the
//!   nearest-neighbour estimate.
//! - [`oracle`]: exact brute-force references and the USVT baseline.
//! - [`pipeline`]: the end-to-end completion run used by the harness.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod rng;

pub mod collapse;
pub mod nn_estimator;
pub mod oracle;
pub mod pipeline;
pub mod spectral_distance;
pub mod tensor_model;

pub use error::{Error, Result};
