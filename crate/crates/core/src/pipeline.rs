//! End-to-end estimation: split, collapse, distances, averaging.

use alloc::vec::Vec;

use crate::collapse::{collapse, empirical_density, CollapsedMatrix};
use crate::nn_estimator::{estimate, Estimate, EstimatorConfig, Fallback};
use crate::spectral_distance::{build_graph, choose_depth, distance_matrix, DistanceMatrix};
use crate::tensor_model::{split_samples, SparseObservations, WeightVectors};
use crate::Result;

/// Collapse partner of mode `y`.
pub fn partner_mode(y: usize, order: usize) -> usize {
    (y + 1) % order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceOptions {
    /// BFS depth; chosen from the sampling density when `None`.
    pub depth: Option<usize>,
    /// Divide each mode's distances by its diagonal scale.
    pub normalize: bool,
    /// Build the graph from the whole sample instead of the first split.
    pub graph_from_full_sample: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            depth: None,
            normalize: true,
            graph_from_full_sample: false,
        }
    }
}

/// Everything computed before the final averaging step.
#[derive(Debug, Clone)]
pub struct DistanceStage {
    pub splits: [SparseObservations; 3],
    pub collapsed: Vec<CollapsedMatrix>,
    pub raw_distances: Vec<DistanceMatrix>,
    pub distances: Vec<DistanceMatrix>,
    pub depth: usize,
}

impl DistanceStage {
    /// Mean observed-cell fraction over the collapsed matrices.
    pub fn empirical_ptilde(&self) -> f64 {
        self.collapsed.iter().map(empirical_density).sum::<f64>() / self.collapsed.len() as f64
    }

    pub fn third_sample(&self) -> &SparseObservations {
        &self.splits[2]
    }

    /// Final nearest-neighbour estimate at bandwidth `eta`.
    pub fn estimate(&self, eta: f64, fallback: Fallback) -> Result<Estimate> {
        estimate(&self.splits[2], &self.distances, &EstimatorConfig::new(eta, fallback)?)
    }
}

/// Splits `obs` and computes per-mode distance estimates, mode `y` paired
/// with [`partner_mode`].
pub fn distance_stage(
    obs: &SparseObservations,
    weights: &WeightVectors,
    seed: u64,
    options: DistanceOptions,
) -> Result<DistanceStage> {
    let shape = obs.shape();
    let t = shape.order();
    let splits = split_samples(obs, seed);
    let mut collapsed = Vec::with_capacity(t);
    let mut raw = Vec::with_capacity(t);
    let mut depth = 0;
    for y in 0..t {
        let z = partner_mode(y, t);
        let s = match options.depth {
            Some(s) => s,
            None => choose_depth(shape.dim(y), obs.density(), t)?,
        };
        depth = depth.max(s);
        let m = collapse(&splits[0], y, z, weights)?;
        let graph = if options.graph_from_full_sample {
            build_graph(&collapse(obs, y, z, weights)?)
        } else {
            build_graph(&m)
        };
        raw.push(distance_matrix(&graph, &splits[1], weights, (y, z), s)?);
        collapsed.push(m);
    }
    let distances = if options.normalize {
        raw.iter().map(DistanceMatrix::normalized).collect()
    } else {
        raw.clone()
    };
    Ok(DistanceStage {
        splits,
        collapsed,
        raw_distances: raw,
        distances,
        depth,
    })
}
