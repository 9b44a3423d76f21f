//! Genre-aware music recommendation from graph-refined MFCC embeddings.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`audio`]: decode WAV audio, cut a random fixed-length window and reduce
//!    it to a 30-dimensional MFCC vector.
//! 2. [`graph`]: connect every pair of songs that share a genre, giving a
//!    disjoint union of genre cliques, and serve its normalized adjacency.
//! 3. [`nn`]: GCN and GraphSAGE layers, the genre classifier MLP, softmax
//!    cross-entropy, hand-written backpropagation and Adam.
//! 4. [`train`]: staged training. First the graph layer is trained with a
//!    throwaway linear head, then the classifier on the frozen embeddings.
//! 5. [`recommend`]: Euclidean top-10 retrieval over embeddings and the
//!    per-genre recommendation accuracy (gamma) report.
//!
//! [`synth`] generates a small labelled audio corpus for experiments, and
//! [`cli`] wires everything behind the `genregraph` binary.

pub mod audio;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod genre;
pub mod graph;
pub mod matrix;
pub mod nn;
pub mod recommend;
pub mod rng;
pub mod store;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use genre::Genre;
pub use matrix::DenseMatrix;

/// Number of MFCC coefficients kept per song.
pub const MFCC_DIM: usize = 30;
/// Width of the graph-refined embedding.
pub const EMBED_DIM: usize = 60;
/// Length of every recommendation list.
pub const TOP_K: usize = 10;
