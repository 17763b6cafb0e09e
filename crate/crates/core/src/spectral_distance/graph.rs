use alloc::vec;
use alloc::vec::Vec;

use crate::collapse::CollapsedMatrix;

/// Which vertex class of the bipartite graph: `Left` are `y` coordinates,
/// `Right` are `z` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Side of BFS level `level` for a tree rooted on the left.
    pub fn of_level(level: usize) -> Self {
        if level % 2 == 0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// Weighted bipartite data graph; adjacency lists are sorted by neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    left: Vec<Vec<(usize, f64)>>,
    right: Vec<Vec<(usize, f64)>>,
}

impl BipartiteGraph {
    pub fn left_size(&self) -> usize {
        self.left.len()
    }

    pub fn right_size(&self) -> usize {
        self.right.len()
    }

    pub fn size(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left_size(),
            Side::Right => self.right_size(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.left.iter().map(Vec::len).sum()
    }

    /// Neighbours of vertex `v` on `side`, ascending.
    pub fn neighbors(&self, side: Side, v: usize) -> &[(usize, f64)] {
        match side {
            Side::Left => &self.left[v],
            Side::Right => &self.right[v],
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.left
            .iter()
            .enumerate()
            .flat_map(|(a, adj)| adj.iter().map(move |&(b, w)| (a, b, w)))
    }
}

/// One edge per observed cell, weighted by the cell value.
pub fn build_graph(m: &CollapsedMatrix) -> BipartiteGraph {
    let mut left = vec![Vec::new(); m.rows()];
    let mut right = vec![Vec::new(); m.cols()];
    // row-major iteration keeps both adjacency directions sorted
    for (a, b, _, w) in m.cells() {
        left[a].push((b, w));
        right[b].push((a, w));
    }
    BipartiteGraph { left, right }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::collapse;
    use crate::tensor_model::{sample_observations, FactorFamily, Shape, TuckerModel, WeightVectors};

    #[test]
    fn full_two_by_two_is_complete() {
        let m = CollapsedMatrix::from_cells((0, 1), (2, 2), [(0, 0, 1, 0.1), (0, 1, 1, 0.2), (1, 0, 1, 0.3), (1, 1, 1, 0.4)])
            .unwrap();
        let g = build_graph(&m);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.neighbors(Side::Left, 1), &[(0, 0.3), (1, 0.4)]);
        assert_eq!(g.neighbors(Side::Right, 1), &[(0, 0.2), (1, 0.4)]);
    }

    #[test]
    fn empty_mask_has_no_edges() {
        let m = CollapsedMatrix::from_cells((0, 1), (3, 4), []).unwrap();
        let g = build_graph(&m);
        assert_eq!(g.edge_count(), 0);
        assert_eq!((g.left_size(), g.right_size()), (3, 4));
    }

    #[test]
    fn edges_equal_mask_scan() {
        let s = Shape::cubic(3, 8).unwrap();
        let model = TuckerModel::orthogonal_cp(s.clone(), &[1.0], FactorFamily::ShiftedCosine, 2).unwrap();
        for seed in 0..5 {
            let obs = sample_observations(&model, 0.03, 0.0, seed).unwrap();
            let m = collapse(&obs, 0, 1, &WeightVectors::uniform(&s)).unwrap();
            let g = build_graph(&m);
            let edges: std::collections::BTreeSet<(usize, usize)> = g.edges().map(|(a, b, _)| (a, b)).collect();
            let mut scan = std::collections::BTreeSet::new();
            for a in 0..8 {
                for b in 0..8 {
                    if m.is_observed(a, b) {
                        scan.insert((a, b));
                    }
                }
            }
            assert_eq!(edges, scan);
            for (a, b, w) in g.edges() {
                assert_eq!(Some(w), m.get(a, b));
            }
            for v in 0..8 {
                for side in [Side::Left, Side::Right] {
                    assert!(g.neighbors(side, v).windows(2).all(|w| w[0].0 < w[1].0));
                }
            }
        }
    }
}
