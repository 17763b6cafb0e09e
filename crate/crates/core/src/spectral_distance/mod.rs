//! Latent-distance estimation from a collapsed matrix.
//!
//! The observed cells of a [`CollapsedMatrix`](crate::collapse::CollapsedMatrix)
//! form a bipartite graph between the `y` and `z` coordinates. From every
//! `y`-vertex a breadth-first tree is grown to depth `s + 1`; the product of
//! edge weights along the tree path to each reached vertex defines the
//! neighbourhood vectors. Pairwise statistics between the depth-`s` vector of
//! one root and the depth-`s + 1` vector of another, evaluated on a second,
//! independent sample, give the distance estimates.

mod bfs;
mod distance;
mod graph;

pub use bfs::{bfs_neighborhood, neighborhood_vector, BfsForest, SparseVector};
pub use distance::{choose_depth, distance_matrix, pair_statistic, CrossSums, DistanceMatrix};
pub use graph::{build_graph, BipartiteGraph, Side};
