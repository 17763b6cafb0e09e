use alloc::vec;
use alloc::vec::Vec;

use super::graph::{BipartiteGraph, Side};
use crate::{Error, Result};

/// Breadth-first tree grown from a left vertex.
///
/// Frontier vertices are expanded in ascending order, so among several
/// candidate parents the smallest index wins.
#[derive(Debug, Clone)]
pub struct BfsForest {
    root: usize,
    levels: Vec<Vec<usize>>,
    parent: [Vec<Option<usize>>; 2],
    path_product: [Vec<f64>; 2],
}

fn slot(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

impl BfsForest {
    /// Grows levels `0..=max_depth` (fewer if the component is exhausted).
    pub fn grow(g: &BipartiteGraph, root: usize, max_depth: usize) -> Result<Self> {
        if root >= g.left_size() {
            return Err(Error::IndexOutOfRange {
                mode: 0,
                index: root,
                size: g.left_size(),
            });
        }
        let mut parent = [vec![None; g.left_size()], vec![None; g.right_size()]];
        let mut product = [vec![f64::NAN; g.left_size()], vec![f64::NAN; g.right_size()]];
        let mut seen = [vec![false; g.left_size()], vec![false; g.right_size()]];
        seen[0][root] = true;
        product[0][root] = 1.0;
        let mut levels = vec![vec![root]];
        for depth in 1..=max_depth {
            let from = Side::of_level(depth - 1);
            let to = from.other();
            let mut next = Vec::new();
            for &u in &levels[depth - 1] {
                let pu = product[slot(from)][u];
                for &(v, w) in g.neighbors(from, u) {
                    let t = slot(to);
                    if !seen[t][v] {
                        seen[t][v] = true;
                        parent[t][v] = Some(u);
                        product[t][v] = pu * w;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_unstable();
            levels.push(next);
        }
        Ok(Self {
            root,
            levels,
            parent,
            path_product: product,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Deepest non-empty level.
    pub fn depth_reached(&self) -> usize {
        self.levels.len() - 1
    }

    /// Vertices of level `j`, ascending; empty beyond the reached depth.
    pub fn level(&self, j: usize) -> &[usize] {
        self.levels.get(j).map_or(&[], Vec::as_slice)
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn parent(&self, side: Side, v: usize) -> Option<usize> {
        self.parent[slot(side)][v]
    }

    /// Product of edge weights along the tree path from the root; `None` for
    /// vertices not reached.
    pub fn path_product(&self, side: Side, v: usize) -> Option<f64> {
        let p = self.path_product[slot(side)][v];
        (!p.is_nan()).then_some(p)
    }
}

/// Tree of depth `s + 1` rooted at left vertex `a`.
pub fn bfs_neighborhood(g: &BipartiteGraph, a: usize, s: usize) -> Result<BfsForest> {
    BfsForest::grow(g, a, s + 1)
}

/// Sparse vector over one side of the graph, indices ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.indices.binary_search(&i).ok().map(|k| self.values[k])
    }

    /// Dot product with a dense vector, in index order.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }
}

/// Normalised neighbourhood vector of level `j`: supported on that level,
/// with value `path_product(i) / |level|`.
pub fn neighborhood_vector(f: &BfsForest, j: usize) -> Result<SparseVector> {
    if j > f.depth_reached() {
        return Err(Error::TreeTooShallow {
            requested: j,
            reached: f.depth_reached(),
        });
    }
    let level = f.level(j);
    let side = Side::of_level(j);
    let size = level.len() as f64;
    Ok(SparseVector {
        indices: level.to_vec(),
        values: level
            .iter()
            .map(|&v| f.path_product(side, v).expect("level vertices are reached") / size)
            .collect(),
    })
}
