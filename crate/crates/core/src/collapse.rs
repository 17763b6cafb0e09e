//! Weighted collapse of a sparse tensor onto a mode pair.
//!
//! For modes `(y, z)` the collapsed matrix averages, over every observed entry
//! whose `y`/`z` coordinates are `(a, b)`, the observed value times the weights
//! of all remaining coordinates:
//!
//! `M(a, b) = Σ_{i ∈ Ω, i_y = a, i_z = b} T(i) Π_{ℓ ∉ {y,z}} W_ℓ(i_ℓ) / |{i ∈ Ω : i_y = a, i_z = b}|`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{CompensatedSum, Matrix};
use crate::tensor_model::{Shape, SparseObservations, WeightVectors};
use crate::{Error, Result};

/// Sentinel stored in unobserved cells.
pub const UNOBSERVED: f64 = f64::NAN;

/// Partially observed `n_y × n_z` matrix with explicit observation mask.
#[derive(Debug, Clone)]
pub struct CollapsedMatrix {
    y: usize,
    z: usize,
    n_y: usize,
    n_z: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    counts: Vec<u32>,
}

impl CollapsedMatrix {
    /// Assembles a matrix from observed cells `(a, b, count, value)`. Cells
    /// not listed are unobserved.
    pub fn from_cells(
        (y, z): (usize, usize),
        (n_y, n_z): (usize, usize),
        cells: impl IntoIterator<Item = (usize, usize, u32, f64)>,
    ) -> Result<Self> {
        if y == z {
            return Err(Error::InvalidModePair { y, z, order: 0 });
        }
        let mut m = Self::unobserved(y, z, n_y, n_z);
        for (a, b, count, value) in cells {
            if a >= n_y || b >= n_z {
                return Err(Error::ShapeMismatch(format!("cell ({a}, {b}) outside {n_y}x{n_z}")));
            }
            if count == 0 || !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "cell ({a}, {b}) with count {count} and value {value}"
                )));
            }
            let c = a * n_z + b;
            m.values[c] = value;
            m.mask[c] = true;
            m.counts[c] = count;
        }
        Ok(m)
    }

    fn unobserved(y: usize, z: usize, n_y: usize, n_z: usize) -> Self {
        Self {
            y,
            z,
            n_y,
            n_z,
            values: vec![UNOBSERVED; n_y * n_z],
            mask: vec![false; n_y * n_z],
            counts: vec![0; n_y * n_z],
        }
    }

    pub fn mode_pair(&self) -> (usize, usize) {
        (self.y, self.z)
    }

    pub fn rows(&self) -> usize {
        self.n_y
    }

    pub fn cols(&self) -> usize {
        self.n_z
    }

    /// Value of an observed cell, `None` when unobserved.
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        let c = a * self.n_z + b;
        self.mask[c].then(|| self.values[c])
    }

    /// Raw value, [`UNOBSERVED`] for unobserved cells.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n_z + b]
    }

    pub fn is_observed(&self, a: usize, b: usize) -> bool {
        self.mask[a * self.n_z + b]
    }

    pub fn count(&self, a: usize, b: usize) -> u32 {
        self.counts[a * self.n_z + b]
    }

    pub fn observed_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Observed cells `(a, b, count, value)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, u32, f64)> + '_ {
        (0..self.n_y * self.n_z)
            .filter(|&c| self.mask[c])
            .map(|c| (c / self.n_z, c % self.n_z, self.counts[c], self.values[c]))
    }

    /// Dense copy with unobserved cells set to `fill`.
    pub fn to_dense(&self, fill: f64) -> Matrix {
        Matrix::from_fn(self.n_y, self.n_z, |a, b| self.get(a, b).unwrap_or(fill))
    }

    /// Bitwise equality of the observed content (sentinels compare equal).
    pub fn same_content(&self, other: &Self) -> bool {
        self.mode_pair() == other.mode_pair()
            && (self.n_y, self.n_z) == (other.n_y, other.n_z)
            && self.mask == other.mask
            && self.counts == other.counts
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Per-cell weighted sums and counts of `obs` over `I_yz(a, b)` in a single
/// pass, without dividing by the count.
pub(crate) fn weighted_cell_sums(
    obs: &SparseObservations,
    y: usize,
    z: usize,
    weights: &WeightVectors,
) -> Result<(Vec<CompensatedSum>, Vec<u32>)> {
    let shape = obs.shape();
    shape.check_mode_pair(y, z)?;
    if !weights.matches(shape) {
        return Err(Error::ShapeMismatch("weight vectors do not match observation shape".into()));
    }
    let (n_y, n_z) = (shape.dim(y), shape.dim(z));
    let mut sums = vec![CompensatedSum::new(); n_y * n_z];
    let mut counts = vec![0u32; n_y * n_z];
    for (idx, v) in obs.iter() {
        let mut term = v;
        for (l, &i) in idx.iter().enumerate() {
            if l != y && l != z {
                term *= weights.mode(l)[i];
            }
        }
        let c = idx[y] * n_z + idx[z];
        sums[c].add(term);
        counts[c] += 1;
    }
    Ok((sums, counts))
}

/// Collapses `obs` onto modes `(y, z)` using the side-information weights.
pub fn collapse(obs: &SparseObservations, y: usize, z: usize, weights: &WeightVectors) -> Result<CollapsedMatrix> {
    let (sums, counts) = weighted_cell_sums(obs, y, z, weights)?;
    let shape = obs.shape();
    let mut m = CollapsedMatrix::unobserved(y, z, shape.dim(y), shape.dim(z));
    for (c, (s, &n)) in sums.iter().zip(&counts).enumerate() {
        if n > 0 {
            m.values[c] = (s.value() / n as f64).clamp(-1.0, 1.0);
            m.mask[c] = true;
            m.counts[c] = n;
        }
    }
    Ok(m)
}

/// `1 - (1 - p)^m` with `m = Π_{ℓ ∉ {y,z}} n_ℓ`: the probability that a
/// collapsed cell receives at least one observation.
pub fn induced_density(p: f64, shape: &Shape, y: usize, z: usize) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidDensity(p));
    }
    shape.check_mode_pair(y, z)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    let m = shape.complement_size(y, z) as f64;
    Ok(-libm::expm1(m * libm::log1p(-p)))
}

/// Fraction of observed cells.
pub fn empirical_density(m: &CollapsedMatrix) -> f64 {
    m.observed_cells() as f64 / (m.rows() * m.cols()) as f64
}
