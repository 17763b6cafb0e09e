use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::bfs::{neighborhood_vector, BfsForest, SparseVector};
use super::graph::BipartiteGraph;
use crate::collapse::weighted_cell_sums;
use crate::tensor_model::{SparseObservations, WeightVectors};
use crate::{Error, Result};

/// BFS depth `⌈ln n / ln(p n^(t-1))⌉`, at least 1.
///
/// With `p = n^(-(t-1)+κ)` this is `⌈1/κ⌉`.
pub fn choose_depth(n: usize, p: f64, t: usize) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidDensity(p));
    }
    let nf = n as f64;
    let log_growth = libm::log(p) + (t as f64 - 1.0) * libm::log(nf);
    if !(log_growth > 1e-12) {
        return Err(Error::BelowConnectivity(libm::exp(log_growth)));
    }
    let ratio = libm::log(nf) / log_growth;
    // absorb rounding in p = n^(-(t-1)+κ) so that ⌈1/κ⌉ is exact
    let s = libm::ceil(ratio - 1e-9);
    Ok((s as usize).max(1))
}

/// Weighted sums of the second sample over `I_yz(i, j)`, kept sparse in both
/// orientations, with the `1 / (p̂ Π_{ℓ∉{y,z}} n_ℓ)` prefactor of the pair
/// statistic.
#[derive(Debug, Clone)]
pub struct CrossSums {
    by_y: Vec<Vec<(usize, f64)>>,
    by_z: Vec<Vec<(usize, f64)>>,
    prefactor: f64,
}

impl CrossSums {
    pub fn build(obs2: &SparseObservations, y: usize, z: usize, weights: &WeightVectors) -> Result<Self> {
        let (sums, counts) = weighted_cell_sums(obs2, y, z, weights)?;
        let shape = obs2.shape();
        let (n_y, n_z) = (shape.dim(y), shape.dim(z));
        let mut by_y = vec![Vec::new(); n_y];
        let mut by_z = vec![Vec::new(); n_z];
        for a in 0..n_y {
            for b in 0..n_z {
                let c = a * n_z + b;
                if counts[c] > 0 {
                    let v = sums[c].value();
                    by_y[a].push((b, v));
                    by_z[b].push((a, v));
                }
            }
        }
        let prefactor = 1.0 / (obs2.density() * shape.complement_size(y, z) as f64);
        Ok(Self { by_y, by_z, prefactor })
    }

    /// `Ñ_sᵀ A'` as a dense vector over the side of level `s + 1`, where
    /// `A' = A` for even `s` and `Aᵀ` for odd `s`.
    pub fn project(&self, level_s: &SparseVector, s: usize) -> Vec<f64> {
        let (rows, width) = if s % 2 == 0 {
            (&self.by_y, self.by_z.len())
        } else {
            (&self.by_z, self.by_y.len())
        };
        let mut out = vec![0.0; width];
        for (i, v) in level_s.iter() {
            for &(j, a) in &rows[i] {
                out[j] += v * a;
            }
        }
        out
    }

    /// `D(a, b)` from a precomputed projection of the root's level-`s` vector.
    pub fn statistic_from_projection(&self, projection: &[f64], level_s1: &SparseVector) -> f64 {
        level_s1.dot_dense(projection) * self.prefactor
    }

    pub fn statistic(&self, level_s: &SparseVector, level_s1: &SparseVector, s: usize) -> f64 {
        self.statistic_from_projection(&self.project(level_s, s), level_s1)
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }
}

/// `D(a, b)` for the roots of `fa` (level `s`) and `fb` (level `s + 1`),
/// evaluated on `obs2`.
pub fn pair_statistic(
    fa: &BfsForest,
    fb: &BfsForest,
    obs2: &SparseObservations,
    weights: &WeightVectors,
    (y, z): (usize, usize),
    s: usize,
) -> Result<f64> {
    let va = neighborhood_vector(fa, s)?;
    let vb = neighborhood_vector(fb, s + 1)?;
    let cross = CrossSums::build(obs2, y, z, weights)?;
    Ok(cross.statistic(&va, &vb, s))
}

/// Symmetric per-mode distance estimates.
///
/// Pairs involving a root whose tree did not reach depth `s + 1` are
/// invalid and hold `NaN`; the diagonal is always valid and zero.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    mode: usize,
    n: usize,
    depth: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
    scale: f64,
}

impl DistanceMatrix {
    /// Assembles a matrix from upper-triangle pairs `(a, b, value, valid)`.
    pub fn from_pairs(
        mode: usize,
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64, bool)>,
    ) -> Result<Self> {
        let mut values = vec![f64::NAN; n * n];
        let mut valid = vec![false; n * n];
        for a in 0..n {
            values[a * n + a] = 0.0;
            valid[a * n + a] = true;
        }
        for (a, b, v, ok) in pairs {
            if a >= b || b >= n {
                return Err(Error::InvalidParameter(format!("pair ({a}, {b}) not in upper triangle of {n}")));
            }
            let v = if ok { v } else { f64::NAN };
            values[a * n + b] = v;
            values[b * n + a] = v;
            valid[a * n + b] = ok;
            valid[b * n + a] = ok;
        }
        Ok(Self {
            mode,
            n,
            depth: 0,
            values,
            valid,
            scale: f64::NAN,
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// BFS depth `s` the estimates were computed with (0 if unknown).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_valid(&self, a: usize, b: usize) -> bool {
        self.valid[a * self.n + b]
    }

    /// Estimate for a valid pair.
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.is_valid(a, b).then(|| self.values[a * self.n + b])
    }

    /// Raw value; `NaN` for invalid pairs.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    /// Mean of the diagonal statistics `D(a, a)` over roots that reached full
    /// depth: the natural scale of the estimates. `NaN` when unknown.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len().max(1) as f64
    }

    /// Upper-triangle pairs `(a, b, value, valid)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64, bool)> + '_ {
        (0..self.n).flat_map(move |a| (a + 1..self.n).map(move |b| (a, b, self.value(a, b), self.is_valid(a, b))))
    }

    /// Estimates divided by [`DistanceMatrix::scale`] when it is positive
    /// and finite; otherwise an unchanged copy.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        if self.scale.is_finite() && self.scale > 0.0 {
            for v in &mut out.values {
                *v /= self.scale;
            }
            out.scale = 1.0;
        }
        out
    }

    /// Bitwise equality of values and flags.
    pub fn same_content(&self, other: &Self) -> bool {
        self.n == other.n
            && self.mode == other.mode
            && self.valid == other.valid
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// `d̂(a, b) = D(a, a) + D(b, b) - D(a, b) - D(b, a)` for every pair of left
/// vertices of `graph`, with `D` evaluated on the second sample `obs2`.
pub fn distance_matrix(
    graph: &BipartiteGraph,
    obs2: &SparseObservations,
    weights: &WeightVectors,
    (y, z): (usize, usize),
    s: usize,
) -> Result<DistanceMatrix> {
    let shape = obs2.shape();
    shape.check_mode_pair(y, z)?;
    if graph.left_size() != shape.dim(y) || graph.right_size() != shape.dim(z) {
        return Err(Error::ShapeMismatch("graph sides do not match the mode pair".into()));
    }
    let cross = CrossSums::build(obs2, y, z, weights)?;
    let n = graph.left_size();

    let mut level_s = Vec::with_capacity(n);
    let mut level_s1 = Vec::with_capacity(n);
    for a in 0..n {
        let f = BfsForest::grow(graph, a, s + 1)?;
        if f.depth_reached() > s {
            level_s.push(Some(neighborhood_vector(&f, s)?));
            level_s1.push(Some(neighborhood_vector(&f, s + 1)?));
        } else {
            level_s.push(None);
            level_s1.push(None);
        }
    }

    // stat[a * n + b] = D(a, b)
    let mut stat = vec![f64::NAN; n * n];
    for a in 0..n {
        let Some(va) = &level_s[a] else { continue };
        let projection = cross.project(va, s);
        for b in 0..n {
            if let Some(vb) = &level_s1[b] {
                stat[a * n + b] = cross.statistic_from_projection(&projection, vb);
            }
        }
    }

    let reached: Vec<bool> = level_s.iter().map(Option::is_some).collect();
    let mut values = vec![f64::NAN; n * n];
    let mut valid = vec![false; n * n];
    for a in 0..n {
        values[a * n + a] = 0.0;
        valid[a * n + a] = true;
        if !reached[a] {
            continue;
        }
        for b in a + 1..n {
            if reached[b] {
                let d = stat[a * n + a] + stat[b * n + b] - stat[a * n + b] - stat[b * n + a];
                values[a * n + b] = d;
                values[b * n + a] = d;
                valid[a * n + b] = true;
                valid[b * n + a] = true;
            }
        }
    }
    let diag: Vec<f64> = (0..n).filter(|&a| reached[a]).map(|a| stat[a * n + a]).collect();
    let scale = if diag.is_empty() {
        f64::NAN
    } else {
        diag.iter().sum::<f64>() / diag.len() as f64
    };
    Ok(DistanceMatrix {
        mode: y,
        n,
        depth: s,
        values,
        valid,
        scale,
    })
}
