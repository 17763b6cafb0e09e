//! Tensors, latent-variable generative models and synthetic data.
//!
//! A [`TuckerModel`] evaluates `T(i) = Σ_k Λ(k) Π_ℓ Q_ℓ(i_ℓ, k_ℓ)` where each
//! factor matrix is a fixed function family evaluated at i.i.d. uniform latent
//! coordinates. Observations are Bernoulli-sampled entries with bounded
//! additive noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::Matrix;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Order and per-mode sizes of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    /// Order must be at least 3 and every mode at least 2.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 3 {
            return Err(Error::InvalidShape(format!(
                "order {} < 3; matrices are not tensors here",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidShape(format!("mode size {d} < 2")));
        }
        Ok(Self { dims })
    }

    pub fn cubic(order: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; order])
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Number of entries, saturating at `usize::MAX`.
    pub fn numel(&self) -> usize {
        self.dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d))
    }

    /// Product of the sizes of every mode other than `y` and `z`.
    pub fn complement_size(&self, y: usize, z: usize) -> usize {
        self.dims
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != y && l != z)
            .fold(1usize, |acc, (_, &d)| acc.saturating_mul(d))
    }

    pub fn check_mode_pair(&self, y: usize, z: usize) -> Result<()> {
        if y == z || y >= self.order() || z >= self.order() {
            return Err(Error::InvalidModePair {
                y,
                z,
                order: self.order(),
            });
        }
        Ok(())
    }

    pub fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() {
            return Err(Error::LengthMismatch {
                expected: self.order(),
                got: index.len(),
            });
        }
        for (mode, (&i, &size)) in index.iter().zip(&self.dims).enumerate() {
            if i >= size {
                return Err(Error::IndexOutOfRange {
                    mode,
                    index: i,
                    size,
                });
            }
        }
        Ok(())
    }

    /// Row-major (last mode fastest) linear offset. The index must be valid.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.dims)
            .fold(0usize, |acc, (&i, &d)| acc * d + i)
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn unravel_into(&self, mut linear: usize, out: &mut [usize]) {
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = linear % d;
            linear /= d;
        }
    }
}

/// Built-in latent function families `q_k : [0,1] → ℝ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorFamily {
    /// `q_k(x) = 1` for every column.
    Constant,
    /// `q_k(x) = √2 cos(kπx)`, `k = 1..=r`: orthonormal and mean zero.
    Cosine,
    /// Orthonormal columns with mean `1/√(r+1)`: the rows of the Householder
    /// reflection sending `e_0` to the normalised all-ones vector, applied to
    /// the basis `{1, √2 cos(πx), …, √2 cos(rπx)}`.
    ShiftedCosine,
    /// Rademacher functions: column 0 is `+1` on `x < 1/2 + bias` and `-1`
    /// otherwise, column `k ≥ 1` is `sign(sin(2^(k+1) π x))`.
    Rademacher { bias: f64 },
}

impl FactorFamily {
    fn householder_entry(r: usize, k: usize, j: usize) -> f64 {
        let inv = 1.0 / libm::sqrt((r + 1) as f64);
        let v = |j: usize| if j == 0 { 1.0 - inv } else { -inv };
        let vv = 2.0 - 2.0 * inv;
        let delta = if k == j { 1.0 } else { 0.0 };
        delta - 2.0 * v(k) * v(j) / vv
    }

    /// Value of column `k` (0-based) of a rank-`r` family at latent `x`.
    pub fn eval(&self, k: usize, r: usize, x: f64) -> f64 {
        match *self {
            FactorFamily::Constant => 1.0,
            FactorFamily::Cosine => SQRT_2 * libm::cos((k + 1) as f64 * core::f64::consts::PI * x),
            FactorFamily::ShiftedCosine => {
                let mut acc = Self::householder_entry(r, k, 0);
                for j in 1..=r {
                    acc += Self::householder_entry(r, k, j)
                        * SQRT_2
                        * libm::cos(j as f64 * core::f64::consts::PI * x);
                }
                acc
            }
            FactorFamily::Rademacher { bias } => {
                if k == 0 {
                    if x < 0.5 + bias {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    let period = libm::pow(2.0, (k + 1) as f64);
                    if libm::sin(period * core::f64::consts::PI * x) >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            }
        }
    }

    /// Analytic bound on `sup_x |q_k(x)|`.
    pub fn column_bound(&self, k: usize, r: usize) -> f64 {
        match *self {
            FactorFamily::Constant | FactorFamily::Rademacher { .. } => 1.0,
            FactorFamily::Cosine => SQRT_2,
            FactorFamily::ShiftedCosine => {
                let mut b = libm::fabs(Self::householder_entry(r, k, 0));
                for j in 1..=r {
                    b += SQRT_2 * libm::fabs(Self::householder_entry(r, k, j));
                }
                b
            }
        }
    }

    /// Whether the columns are orthonormal in `L²(U[0,1])`.
    pub fn is_orthonormal(&self) -> bool {
        match *self {
            FactorFamily::Cosine | FactorFamily::ShiftedCosine => true,
            FactorFamily::Rademacher { bias } => bias == 0.0,
            FactorFamily::Constant => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    OrthogonalCp,
    GeneralTucker,
}

/// Dense `r × … × r` core tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreTensor {
    rank: usize,
    order: usize,
    data: Vec<f64>,
}

impl CoreTensor {
    pub fn zeros(rank: usize, order: usize) -> Self {
        Self {
            rank,
            order,
            data: vec![0.0; rank.pow(order as u32)],
        }
    }

    pub fn superdiagonal(order: usize, lambdas: &[f64]) -> Self {
        let mut core = Self::zeros(lambdas.len(), order);
        for (k, &l) in lambdas.iter().enumerate() {
            let off = core.diagonal_offset(k);
            core.data[off] = l;
        }
        core
    }

    pub fn from_data(rank: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rank.pow(order as u32);
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { rank, order, data })
    }

    /// Dense core with i.i.d. `U[-1, 1]` entries.
    pub fn random(rank: usize, order: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Core);
        let mut core = Self::zeros(rank, order);
        for v in &mut core.data {
            *v = rng.gen_range(-1.0..=1.0);
        }
        core
    }

    fn diagonal_offset(&self, k: usize) -> usize {
        (0..self.order).fold(0, |acc, _| acc * self.rank + k)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        let off = k.iter().fold(0, |acc, &kk| acc * self.rank + kk);
        self.data[off]
    }

    /// Unravels a flat core offset into a multi-index.
    pub fn unravel(&self, mut offset: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = offset % self.rank;
            offset /= self.rank;
        }
    }

    pub fn is_superdiagonal(&self) -> bool {
        let mut k = vec![0usize; self.order];
        self.data.iter().enumerate().all(|(off, &v)| {
            if v == 0.0 {
                return true;
            }
            self.unravel(off, &mut k);
            k.iter().all(|&x| x == k[0])
        })
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// Ground-truth low-rank latent-variable tensor.
#[derive(Debug, Clone)]
pub struct TuckerModel {
    shape: Shape,
    core: CoreTensor,
    latents: Vec<Vec<f64>>,
    factors: Vec<Matrix>,
    kind: FactorKind,
    family: Option<FactorFamily>,
    factor_bound: f64,
    value_bound: f64,
}

impl TuckerModel {
    /// Orthogonal CP model with superdiagonal core `lambdas`, latents drawn
    /// i.i.d. uniform on `[0, 1]`, rescaled so that `sup |T| ≤ 1`.
    pub fn orthogonal_cp(shape: Shape, lambdas: &[f64], family: FactorFamily, seed: u64) -> Result<Self> {
        let rank = lambdas.len();
        let core = CoreTensor::superdiagonal(shape.order(), lambdas);
        Self::from_family(shape, rank, core, FactorKind::OrthogonalCp, family, seed)
    }

    /// Tucker model with an arbitrary dense core.
    pub fn general_tucker(shape: Shape, core: CoreTensor, family: FactorFamily, seed: u64) -> Result<Self> {
        let rank = core.rank();
        if core.order() != shape.order() {
            return Err(Error::ShapeMismatch(format!(
                "core order {} vs tensor order {}",
                core.order(),
                shape.order()
            )));
        }
        Self::from_family(shape, rank, core, FactorKind::GeneralTucker, family, seed)
    }

    fn from_family(
        shape: Shape,
        rank: usize,
        core: CoreTensor,
        kind: FactorKind,
        family: FactorFamily,
        seed: u64,
    ) -> Result<Self> {
        let max = *shape.dims().iter().min().expect("order >= 3");
        if rank == 0 || rank > max {
            return Err(Error::InvalidRank { rank, max });
        }
        if let FactorFamily::Rademacher { bias } = family {
            if !(0.0..=0.5).contains(&bias) {
                return Err(Error::InvalidParameter(format!("bias {bias} outside [0, 0.5]")));
            }
        }
        let mut rng = rng::stream(seed, Purpose::Latents);
        let latents: Vec<Vec<f64>> = shape
            .dims()
            .iter()
            .map(|&n| (0..n).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let factors = latents
            .iter()
            .map(|xs| Matrix::from_fn(xs.len(), rank, |i, k| family.eval(k, rank, xs[i])))
            .collect();
        let bounds: Vec<f64> = (0..rank).map(|k| family.column_bound(k, rank)).collect();
        let factor_bound = bounds.iter().copied().fold(0.0, f64::max);
        let value_bound = core_bound(&core, |_, k| bounds[k]);
        let mut model = Self {
            shape,
            core,
            latents,
            factors,
            kind,
            family: Some(family),
            factor_bound,
            value_bound,
        };
        model.rescale_to(1.0);
        Ok(model)
    }

    /// Assembles a model from explicit parts. Factor bounds are taken from the
    /// realised factor entries; no rescaling is applied, but the implied value
    /// bound must not exceed 1.
    pub fn from_parts(
        shape: Shape,
        core: CoreTensor,
        latents: Vec<Vec<f64>>,
        factors: Vec<Matrix>,
        kind: FactorKind,
    ) -> Result<Self> {
        let t = shape.order();
        if latents.len() != t || factors.len() != t || core.order() != t {
            return Err(Error::LengthMismatch {
                expected: t,
                got: latents.len().min(factors.len()).min(core.order()),
            });
        }
        let rank = core.rank();
        for (l, (xs, q)) in latents.iter().zip(&factors).enumerate() {
            let n = shape.dim(l);
            if xs.len() != n || q.rows() != n || q.cols() != rank {
                return Err(Error::ShapeMismatch(format!("mode {l} latents/factors")));
            }
            if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidParameter(format!("mode {l} latent outside [0, 1]")));
            }
        }
        if kind == FactorKind::OrthogonalCp && !core.is_superdiagonal() {
            return Err(Error::InvalidParameter("orthogonal CP core must be superdiagonal".into()));
        }
        let col_max = |l: usize, k: usize| {
            (0..factors[l].rows())
                .map(|i| libm::fabs(factors[l][(i, k)]))
                .fold(0.0, f64::max)
        };
        let factor_bound = (0..t)
            .flat_map(|l| (0..rank).map(move |k| (l, k)))
            .map(|(l, k)| col_max(l, k))
            .fold(0.0, f64::max);
        let value_bound = core_bound(&core, col_max);
        if value_bound > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "value bound {value_bound} exceeds 1"
            )));
        }
        Ok(Self {
            shape,
            core,
            latents,
            factors,
            kind,
            family: None,
            factor_bound,
            value_bound,
        })
    }

    fn rescale_to(&mut self, target: f64) {
        if self.value_bound > target {
            let factor = target / self.value_bound;
            self.core.scale(factor);
            self.value_bound = target;
        }
    }

    /// Shrinks the core so that `sup |T| + noise ≤ 1`.
    pub fn with_noise_headroom(mut self, noise_amplitude: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&noise_amplitude) {
            return Err(Error::InvalidParameter(format!(
                "noise amplitude {noise_amplitude} outside [0, 1)"
            )));
        }
        self.rescale_to(1.0 - noise_amplitude);
        Ok(self)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.core.rank()
    }

    pub fn core(&self) -> &CoreTensor {
        &self.core
    }

    pub fn latents(&self, mode: usize) -> &[f64] {
        &self.latents[mode]
    }

    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn family(&self) -> Option<FactorFamily> {
        self.family
    }

    /// Bound `B` on every factor entry.
    pub fn factor_bound(&self) -> f64 {
        self.factor_bound
    }

    /// Bound on `sup |T|`.
    pub fn value_bound(&self) -> f64 {
        self.value_bound
    }

    pub fn evaluate(&self, index: &[usize]) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.evaluate_unchecked(index))
    }

    /// `Σ_k Λ(k) Π_ℓ Q_ℓ(i_ℓ, k_ℓ)` without bounds checks on `index`.
    pub fn evaluate_unchecked(&self, index: &[usize]) -> f64 {
        let r = self.rank();
        if self.kind == FactorKind::OrthogonalCp {
            let mut total = 0.0;
            for k in 0..r {
                let lambda = self.core.data[self.core.diagonal_offset(k)];
                let mut prod = lambda;
                for (l, &i) in index.iter().enumerate() {
                    prod *= self.factors[l][(i, k)];
                }
                total += prod;
            }
            return total;
        }
        // contract the core one mode at a time, first mode outermost
        let mut buf = self.core.data.clone();
        let mut len = buf.len();
        for (l, &i) in index.iter().enumerate().rev() {
            len /= r;
            let row = self.factors[l].row(i);
            for o in 0..len {
                let chunk = &buf[o * r..o * r + r];
                let v: f64 = chunk.iter().zip(row).map(|(a, b)| a * b).sum();
                buf[o] = v;
            }
        }
        buf[0]
    }

    /// Every entry in row-major order, guarded at `limit` entries.
    pub fn dense(&self, limit: usize) -> Result<Vec<f64>> {
        let numel = self.shape.numel();
        if numel > limit {
            return Err(Error::SizeGuard {
                what: "dense evaluation",
                size: numel,
                limit,
            });
        }
        let mut idx = vec![0usize; self.shape.order()];
        Ok((0..numel)
            .map(|lin| {
                self.shape.unravel_into(lin, &mut idx);
                self.evaluate_unchecked(&idx)
            })
            .collect())
    }
}

fn core_bound(core: &CoreTensor, col_bound: impl Fn(usize, usize) -> f64) -> f64 {
    let mut k = vec![0usize; core.order()];
    let mut total = 0.0;
    for (off, &v) in core.data().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        core.unravel(off, &mut k);
        total += libm::fabs(v) * k.iter().enumerate().map(|(l, &kk)| col_bound(l, kk)).product::<f64>();
    }
    total
}

/// Observed entries of a tensor in lexicographic index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservations {
    shape: Shape,
    indices: Vec<usize>,
    values: Vec<f64>,
    density: f64,
    seed: u64,
}

impl SparseObservations {
    pub fn empty(shape: Shape, density: f64, seed: u64) -> Self {
        Self {
            shape,
            indices: Vec::new(),
            values: Vec::new(),
            density,
            seed,
        }
    }

    /// Validates and canonicalises arbitrary entries. Duplicate indices keep
    /// their first occurrence; the number dropped is returned.
    pub fn from_entries(
        shape: Shape,
        entries: Vec<(Vec<usize>, f64)>,
        density: f64,
        seed: u64,
    ) -> Result<(Self, usize)> {
        check_density(density)?;
        let mut keyed = Vec::with_capacity(entries.len());
        for (pos, (idx, v)) in entries.iter().enumerate() {
            shape.check_index(idx)?;
            check_value(*v)?;
            keyed.push((shape.linear_index(idx), pos));
        }
        // stable: first occurrence of a duplicate stays first
        keyed.sort_by_key(|&(lin, _)| lin);
        keyed.dedup_by_key(|&mut (lin, _)| lin);
        let duplicates = entries.len() - keyed.len();
        let t = shape.order();
        let mut indices = Vec::with_capacity(keyed.len() * t);
        let mut values = Vec::with_capacity(keyed.len());
        for &(_, pos) in &keyed {
            indices.extend_from_slice(&entries[pos].0);
            values.push(entries[pos].1);
        }
        Ok((
            Self {
                shape,
                indices,
                values,
                density,
                seed,
            },
            duplicates,
        ))
    }

    fn push_linear(&mut self, linear: usize, value: f64) {
        let t = self.shape.order();
        let start = self.indices.len();
        self.indices.resize(start + t, 0);
        self.shape.unravel_into(linear, &mut self.indices[start..]);
        self.values.push(value);
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self, k: usize) -> &[usize] {
        let t = self.shape.order();
        &self.indices[k * t..(k + 1) * t]
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[usize], f64)> + '_ {
        self.indices
            .chunks_exact(self.shape.order())
            .zip(self.values.iter().copied())
    }

    pub fn mean(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let acc: crate::linalg::CompensatedSum = self.values.iter().copied().collect();
        Some(acc.value() / self.len() as f64)
    }
}

fn check_density(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDensity(p))
    }
}

fn check_value(v: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ValueOutOfRange { value: v })
    }
}

/// Visits a Bernoulli(`p`) subset of `0..numel` in increasing order using
/// geometric gaps.
fn bernoulli_subset(numel: usize, p: f64, rng: &mut impl Rng, mut visit: impl FnMut(usize)) {
    if p >= 1.0 {
        (0..numel).for_each(visit);
        return;
    }
    let log_q = libm::log1p(-p);
    let mut next: usize = 0;
    loop {
        let u: f64 = rng.gen();
        let gap = libm::floor(libm::log1p(-u) / log_q);
        if !(gap < (numel - next) as f64) {
            return;
        }
        next += gap as usize;
        visit(next);
        next += 1;
        if next >= numel {
            return;
        }
    }
}

/// Each entry is kept independently with probability `p`; its value is
/// `T(i) + E(i)` with `E(i)` uniform on `[-noise, noise]`.
pub fn sample_observations(
    model: &TuckerModel,
    p: f64,
    noise_amplitude: f64,
    seed: u64,
) -> Result<SparseObservations> {
    check_density(p)?;
    if !(0.0..1.0).contains(&noise_amplitude) {
        return Err(Error::InvalidParameter(format!(
            "noise amplitude {noise_amplitude} outside [0, 1)"
        )));
    }
    if model.value_bound() + noise_amplitude > 1.0 + 1e-12 {
        return Err(Error::NoiseHeadroom {
            noise: noise_amplitude,
            bound: model.value_bound(),
        });
    }
    let shape = model.shape().clone();
    let mut obs = SparseObservations::empty(shape.clone(), p, seed);
    let mut sampling = rng::stream(seed, Purpose::Sampling);
    let mut noise = rng::stream(seed, Purpose::Noise);
    let mut idx = vec![0usize; shape.order()];
    bernoulli_subset(shape.numel(), p, &mut sampling, |lin| {
        shape.unravel_into(lin, &mut idx);
        let mut v = model.evaluate_unchecked(&idx);
        if noise_amplitude > 0.0 {
            v += noise.gen_range(-noise_amplitude..=noise_amplitude);
        }
        obs.push_linear(lin, v.clamp(-1.0, 1.0));
    });
    Ok(obs)
}

/// Assigns every observation uniformly to one of three disjoint parts; each
/// part carries density `p / 3`.
pub fn split_samples(obs: &SparseObservations, seed: u64) -> [SparseObservations; 3] {
    let mut rng = rng::stream(seed, Purpose::Splitting);
    let p = obs.density() / 3.0;
    let mut parts = [0, 1, 2].map(|_| SparseObservations::empty(obs.shape().clone(), p, seed));
    for (idx, v) in obs.iter() {
        let part = &mut parts[rng.gen_range(0..3)];
        part.indices.extend_from_slice(idx);
        part.values.push(v);
    }
    parts
}

/// How side-information weights are formed.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// All ones.
    Uniform,
    /// `W_ℓ = Σ_k μ_k Q_ℓ(·, k)`, rescaled to sup-norm at most 1.
    LatentCombination(Vec<f64>),
    /// As `LatentCombination` with `μ_k` drawn uniformly from `[low, high]`.
    RandomLatentCombination { low: f64, high: f64 },
    /// Explicit per-mode vectors.
    Custom(Vec<Vec<f64>>),
}

/// Per-mode side-information vectors `W_ℓ ∈ [-1, 1]^{n_ℓ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVectors {
    vectors: Vec<Vec<f64>>,
    kind: WeightKind,
    inner_products: Vec<Vec<f64>>,
}

impl WeightVectors {
    /// All-ones weights without reference to a model.
    pub fn uniform(shape: &Shape) -> Self {
        Self {
            vectors: shape.dims().iter().map(|&n| vec![1.0; n]).collect(),
            kind: WeightKind::Uniform,
            inner_products: Vec::new(),
        }
    }

    pub fn custom(shape: &Shape, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != shape.order() {
            return Err(Error::LengthMismatch {
                expected: shape.order(),
                got: vectors.len(),
            });
        }
        for (w, &n) in vectors.iter().zip(shape.dims()) {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            for &x in w {
                check_value(x)?;
            }
        }
        Ok(Self {
            kind: WeightKind::Custom(vectors.clone()),
            vectors,
            inner_products: Vec::new(),
        })
    }

    pub fn mode(&self, l: usize) -> &[f64] {
        &self.vectors[l]
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// `⟨Q_ℓ(·, k), W_ℓ⟩ / n_ℓ` indexed `[ℓ][k]`; empty when built without a
    /// model.
    pub fn inner_products(&self) -> &[Vec<f64>] {
        &self.inner_products
    }

    pub fn matches(&self, shape: &Shape) -> bool {
        self.vectors.len() == shape.order()
            && self.vectors.iter().zip(shape.dims()).all(|(w, &n)| w.len() == n)
    }
}

/// Builds weight vectors for `model` and records their realised inner
/// products with every latent factor column.
pub fn make_weight_vectors(model: &TuckerModel, kind: WeightKind, seed: u64) -> Result<WeightVectors> {
    let shape = model.shape();
    let r = model.rank();
    let (vectors, kind) = match kind {
        WeightKind::Uniform => (WeightVectors::uniform(shape).vectors, WeightKind::Uniform),
        WeightKind::Custom(vs) => {
            let w = WeightVectors::custom(shape, vs)?;
            (w.vectors, w.kind)
        }
        WeightKind::RandomLatentCombination { low, high } => {
            if !(low.is_finite() && high.is_finite() && low <= high) {
                return Err(Error::InvalidParameter(format!("coefficient range [{low}, {high}]")));
            }
            let mut rng = rng::stream(seed, Purpose::Weights);
            let mu: Vec<f64> = (0..r)
                .map(|_| if low == high { low } else { rng.gen_range(low..=high) })
                .collect();
            (latent_combination(model, &mu)?, WeightKind::LatentCombination(mu))
        }
        WeightKind::LatentCombination(mu) => {
            let v = latent_combination(model, &mu)?;
            (v, WeightKind::LatentCombination(mu))
        }
    };
    let inner_products = (0..shape.order())
        .map(|l| {
            let q = model.factor(l);
            let n = shape.dim(l) as f64;
            (0..r)
                .map(|k| (0..q.rows()).map(|i| q[(i, k)] * vectors[l][i]).sum::<f64>() / n)
                .collect()
        })
        .collect();
    Ok(WeightVectors {
        vectors,
        kind,
        inner_products,
    })
}

fn latent_combination(model: &TuckerModel, mu: &[f64]) -> Result<Vec<Vec<f64>>> {
    if mu.len() != model.rank() {
        return Err(Error::LengthMismatch {
            expected: model.rank(),
            got: mu.len(),
        });
    }
    if mu.iter().any(|m| !m.is_finite() || *m == 0.0) {
        return Err(Error::InvalidParameter("combination coefficients must be finite and nonzero".into()));
    }
    Ok((0..model.shape().order())
        .map(|l| {
            let q = model.factor(l);
            let mut w: Vec<f64> = (0..q.rows())
                .map(|i| mu.iter().enumerate().map(|(k, m)| m * q[(i, k)]).sum())
                .collect();
            let sup = w.iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max);
            if sup > 1.0 {
                w.iter_mut().for_each(|x| *x /= sup);
            }
            w
        })
        .collect())
}

/// Planted 3-XOR instance: `E[T^obs] = (7/8) θ ⊗ θ ⊗ θ` with `θ ∈ {±1}^n`.
#[derive(Debug, Clone)]
pub struct XorInstance {
    model: TuckerModel,
    theta: Vec<f64>,
}

/// Probability that an observed clause carries the planted parity.
pub const XOR_PLANTED_PROB: f64 = 7.0 / 8.0;

impl XorInstance {
    /// `θ_i = +1` with probability `1/2 + bias`, independently.
    pub fn planted(n: usize, bias: f64, seed: u64) -> Result<Self> {
        if !(0.0..=0.5).contains(&bias) {
            return Err(Error::InvalidParameter(format!("bias {bias} outside [0, 0.5]")));
        }
        let family = FactorFamily::Rademacher { bias };
        let mut rng = rng::stream(seed, Purpose::Planted);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let theta: Vec<f64> = xs.iter().map(|&x| family.eval(0, 1, x)).collect();
        Self::assemble(xs, theta)
    }

    /// Instance with an explicit planted vector.
    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidParameter("planted entries must be ±1".into()));
        }
        let xs = theta.iter().map(|&v| if v > 0.0 { 0.25 } else { 0.75 }).collect();
        Self::assemble(xs, theta)
    }

    fn assemble(xs: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let n = theta.len();
        let shape = Shape::cubic(3, n)?;
        let q = Matrix::from_fn(n, 1, |i, _| theta[i]);
        let model = TuckerModel::from_parts(
            shape,
            CoreTensor::superdiagonal(3, &[XOR_PLANTED_PROB]),
            vec![xs.clone(), xs.clone(), xs],
            vec![q.clone(), q.clone(), q],
            FactorKind::OrthogonalCp,
        )?;
        Ok(Self { model, theta })
    }

    /// The expected tensor `(7/8) θ⊗θ⊗θ` as a rank-1 model.
    pub fn model(&self) -> &TuckerModel {
        &self.model
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `⟨θ, 1/n · 1⟩`.
    pub fn mean_theta(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }

    /// Bernoulli(`p`) clauses: the planted parity with probability 7/8,
    /// otherwise `+1` or `-1` with probability 1/16 each.
    pub fn observe(&self, p: f64, seed: u64) -> Result<SparseObservations> {
        check_density(p)?;
        let shape = self.model.shape().clone();
        let mut obs = SparseObservations::empty(shape.clone(), p, seed);
        let mut sampling = rng::stream(seed, Purpose::Sampling);
        let mut noise = rng::stream(seed, Purpose::Noise);
        let mut idx = [0usize; 3];
        bernoulli_subset(shape.numel(), p, &mut sampling, |lin| {
            shape.unravel_into(lin, &mut idx);
            let u: f64 = noise.gen();
            let v = if u < XOR_PLANTED_PROB {
                self.theta[idx[0]] * self.theta[idx[1]] * self.theta[idx[2]]
            } else if u < XOR_PLANTED_PROB + 1.0 / 16.0 {
                1.0
            } else {
                -1.0
            };
            obs.push_linear(lin, v);
        });
        Ok(obs)
    }
}

pub fn make_xor_hard_instance(n: usize, bias: f64, seed: u64) -> Result<XorInstance> {
    XorInstance::planted(n, bias, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn gram_deviation(q: &Matrix) -> f64 {
        let n = q.rows() as f64;
        let g = q.transpose().matmul(q);
        let mut worst: f64 = 0.0;
        for a in 0..g.rows() {
            for b in 0..g.cols() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] / n - target).abs());
            }
        }
        worst
    }

    #[test]
    fn gram_deviation_shrinks_with_n() {
        let mut wins = 0;
        for seed in 0..20 {
            let dev = |n: usize| {
                let s = Shape::cubic(3, n).unwrap();
                let m = TuckerModel::orthogonal_cp(s, &[1.0, 0.5], FactorFamily::Cosine, seed).unwrap();
                gram_deviation(m.factor(0))
            };
            if dev(400) < dev(100) {
                wins += 1;
            }
        }
        assert!(wins >= 18, "wins {wins}");
    }

    #[test]
    fn shape_rejects_matrices_and_tiny_modes() {
        assert!(Shape::new(vec![4, 4]).is_err());
        assert!(Shape::new(vec![4, 1, 4]).is_err());
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.numel(), 24);
        assert_eq!(s.complement_size(0, 2), 3);
    }

    #[test]
    fn linear_index_round_trip() {
        let s = Shape::new(vec![3, 4, 5]).unwrap();
        let mut idx = [0usize; 3];
        for lin in 0..s.numel() {
            s.unravel_into(lin, &mut idx);
            assert_eq!(s.linear_index(&idx), lin);
        }
    }

    #[test]
    fn constant_rank_one_model_is_constant() {
        let s = Shape::cubic(3, 4).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Constant, 3).unwrap();
        let dense = m.dense(1000).unwrap();
        let c = dense[0];
        assert!(c.abs() <= 1.0);
        assert!(dense.iter().all(|&v| v == c));
    }

    #[test]
    fn rank_above_mode_size_is_rejected() {
        let s = Shape::cubic(3, 3).unwrap();
        let err = TuckerModel::orthogonal_cp(s, &[1.0; 5], FactorFamily::Cosine, 1).unwrap_err();
        assert_eq!(err, Error::InvalidRank { rank: 5, max: 3 });
    }

    #[test]
    fn cosine_family_is_bounded_and_nearly_orthonormal() {
        let s = Shape::cubic(3, 100).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0, 0.5], FactorFamily::Cosine, 11).unwrap();
        for l in 0..3 {
            let q = m.factor(l);
            let g = q.transpose().matmul(q);
            assert!((g[(0, 1)] / 100.0).abs() < 0.45);
            assert!((g[(1, 0)] / 100.0).abs() < 0.45);
        }
        let mut idx = [0usize; 3];
        for lin in (0..m.shape().numel()).step_by(97) {
            m.shape().unravel_into(lin, &mut idx);
            assert!(m.evaluate_unchecked(&idx).abs() <= 1.0);
        }
    }

    #[test]
    fn shifted_cosine_has_unit_norm_and_positive_mean() {
        for r in 1..4 {
            let f = FactorFamily::ShiftedCosine;
            // midpoint quadrature on a fine grid
            let grid = 20_000;
            let xs: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect();
            for a in 0..r {
                let mean: f64 = xs.iter().map(|&x| f.eval(a, r, x)).sum::<f64>() / grid as f64;
                assert!((mean - 1.0 / ((r + 1) as f64).sqrt()).abs() < 1e-6);
                for b in 0..r {
                    let ip: f64 = xs.iter().map(|&x| f.eval(a, r, x) * f.eval(b, r, x)).sum::<f64>()
                        / grid as f64;
                    let target = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - target).abs() < 1e-6, "r={r} a={a} b={b} ip={ip}");
                }
                let sup = xs.iter().map(|&x| f.eval(a, r, x).abs()).fold(0.0, f64::max);
                assert!(sup <= f.column_bound(a, r) + 1e-12);
            }
        }
    }

    #[test]
    fn evaluate_rank_one_by_hand() {
        let s = Shape::cubic(3, 3).unwrap();
        let half = Matrix::from_fn(3, 1, |_, _| 0.5);
        let m = TuckerModel::from_parts(
            s,
            CoreTensor::superdiagonal(3, &[2.0]),
            vec![vec![0.1; 3]; 3],
            vec![half.clone(), half.clone(), half],
            FactorKind::OrthogonalCp,
        )
        .unwrap();
        assert_eq!(m.evaluate(&[0, 1, 2]).unwrap(), 0.25);
        assert!(m.evaluate(&[0, 3, 2]).is_err());
    }

    #[test]
    fn zero_core_evaluates_to_zero() {
        let s = Shape::cubic(3, 3).unwrap();
        let m = TuckerModel::general_tucker(s, CoreTensor::zeros(2, 3), FactorFamily::Cosine, 5).unwrap();
        assert!(m.dense(100).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn general_tucker_matches_naive_sum() {
        let s = Shape::cubic(3, 3).unwrap();
        let data: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 4.0).collect();
        let core = CoreTensor::from_data(2, 3, data).unwrap();
        let m = TuckerModel::general_tucker(s, core, FactorFamily::ShiftedCosine, 9).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut naive = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                naive += m.core().get(&[a, b, c])
                                    * m.factor(0)[(i, a)]
                                    * m.factor(1)[(j, b)]
                                    * m.factor(2)[(k, c)];
                            }
                        }
                    }
                    assert!((m.evaluate(&[i, j, k]).unwrap() - naive).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn orthogonal_core_is_superdiagonal() {
        let s = Shape::cubic(3, 5).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0, 0.7, 0.3], FactorFamily::Cosine, 2).unwrap();
        assert!(m.core().is_superdiagonal());
        let mut k = [0usize; 3];
        for (off, &v) in m.core().data().iter().enumerate() {
            m.core().unravel(off, &mut k);
            if v != 0.0 {
                assert!(k[0] == k[1] && k[1] == k[2]);
            }
        }
    }

    #[test]
    fn full_observation_is_dense_tensor() {
        let s = Shape::cubic(3, 4).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::ShiftedCosine, 1).unwrap();
        let obs = sample_observations(&m, 1.0, 0.0, 4).unwrap();
        assert_eq!(obs.len(), 64);
        let dense = m.dense(64).unwrap();
        assert_eq!(obs.values(), &dense[..]);
    }

    #[test]
    fn noise_stays_within_amplitude() {
        let s = Shape::cubic(3, 5).unwrap();
        let q = Matrix::from_fn(5, 1, |_, _| 1.0);
        let m = TuckerModel::from_parts(
            s,
            CoreTensor::superdiagonal(3, &[0.5]),
            vec![vec![0.5; 5]; 3],
            vec![q.clone(), q.clone(), q],
            FactorKind::OrthogonalCp,
        )
        .unwrap();
        let obs = sample_observations(&m, 1.0, 0.1, 8).unwrap();
        assert!(obs.values().iter().all(|&v| (0.4..=0.6).contains(&v)));
        assert!(obs.values().iter().any(|&v| v != 0.5));
    }

    #[test]
    fn headroom_is_enforced() {
        let s = Shape::cubic(3, 4).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Constant, 1).unwrap();
        assert!(matches!(
            sample_observations(&m, 0.5, 0.2, 1),
            Err(Error::NoiseHeadroom { .. })
        ));
        let m = m.with_noise_headroom(0.2).unwrap();
        assert!(sample_observations(&m, 0.5, 0.2, 1).is_ok());
    }

    #[test]
    fn invalid_density_rejected() {
        let s = Shape::cubic(3, 4).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Constant, 1).unwrap();
        assert_eq!(sample_observations(&m, 0.0, 0.0, 1), Err(Error::InvalidDensity(0.0)));
        assert_eq!(sample_observations(&m, 1.5, 0.0, 1), Err(Error::InvalidDensity(1.5)));
    }

    #[test]
    fn sample_count_matches_binomial() {
        let s = Shape::cubic(3, 10).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Constant, 1).unwrap();
        let seeds = 200;
        let total: usize = (0..seeds)
            .map(|seed| sample_observations(&m, 0.5, 0.0, seed).unwrap().len())
            .sum();
        let mean = total as f64 / seeds as f64;
        // sd of the mean of 200 Binomial(1000, 0.5) draws
        let sd = (1000.0f64 * 0.25).sqrt() / (seeds as f64).sqrt();
        assert!((mean - 500.0).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn inclusion_indicators_are_uncorrelated() {
        let s = Shape::cubic(3, 8).unwrap();
        let m = TuckerModel::orthogonal_cp(s.clone(), &[1.0], FactorFamily::Constant, 1).unwrap();
        let (a, b) = (s.linear_index(&[1, 2, 3]), s.linear_index(&[6, 0, 7]));
        let seeds = 500usize;
        let p = 0.3;
        let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
        for seed in 0..seeds as u64 {
            let obs = sample_observations(&m, p, 0.0, seed).unwrap();
            let present: std::collections::HashSet<usize> =
                obs.iter().map(|(idx, _)| s.linear_index(idx)).collect();
            let ia = present.contains(&a) as u8 as f64;
            let ib = present.contains(&b) as u8 as f64;
            sa += ia;
            sb += ib;
            sab += ia * ib;
        }
        let nf = seeds as f64;
        let cov = sab / nf - (sa / nf) * (sb / nf);
        let corr = cov / (p * (1.0 - p));
        // sampling sd of a correlation estimate under independence
        let sd = 1.0 / nf.sqrt();
        assert!(corr.abs() < 3.0 * sd, "corr {corr}");
    }

    #[test]
    fn split_partitions_observations() {
        let s = Shape::cubic(3, 20).unwrap();
        let m = TuckerModel::orthogonal_cp(s.clone(), &[1.0], FactorFamily::Constant, 1).unwrap();
        let obs = sample_observations(&m, 0.375, 0.0, 3).unwrap();
        let parts = split_samples(&obs, 17);
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, obs.len());
        let mut seen = std::collections::BTreeSet::new();
        for part in &parts {
            assert!((part.density() - obs.density() / 3.0).abs() < 1e-15);
            for (idx, _) in part.iter() {
                assert!(seen.insert(s.linear_index(idx)), "overlap");
            }
        }
        let all: std::collections::BTreeSet<usize> = obs.iter().map(|(i, _)| s.linear_index(i)).collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn split_part_sizes_match_multinomial() {
        let s = Shape::cubic(3, 20).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Constant, 1).unwrap();
        let obs = sample_observations(&m, 0.375, 0.0, 3).unwrap();
        assert_eq!(obs.len() > 2800 && obs.len() < 3200, true);
        let n = obs.len() as f64;
        let sd = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for seed in 0..100 {
            for part in split_samples(&obs, seed) {
                assert!((part.len() as f64 - n / 3.0).abs() < 3.0 * sd + 1.0);
            }
        }
    }

    #[test]
    fn split_of_empty_is_empty() {
        let s = Shape::cubic(3, 4).unwrap();
        let obs = SparseObservations::empty(s, 0.1, 0);
        assert!(split_samples(&obs, 1).iter().all(|p| p.is_empty()));
    }

    #[test]
    fn from_entries_dedups_keeping_first() {
        let s = Shape::cubic(3, 3).unwrap();
        let (obs, dups) = SparseObservations::from_entries(
            s,
            vec![(vec![2, 0, 1], 0.5), (vec![0, 0, 0], 0.1), (vec![2, 0, 1], -0.5)],
            0.1,
            0,
        )
        .unwrap();
        assert_eq!(dups, 1);
        assert_eq!(obs.len(), 2);
        assert_eq!(obs.index(0), &[0, 0, 0]);
        assert_eq!(obs.value(1), 0.5);
    }

    #[test]
    fn from_entries_rejects_bad_values() {
        let s = Shape::cubic(3, 3).unwrap();
        assert!(SparseObservations::from_entries(s.clone(), vec![(vec![0, 0, 3], 0.0)], 0.5, 0).is_err());
        assert!(SparseObservations::from_entries(s, vec![(vec![0, 0, 0], 1.5)], 0.5, 0).is_err());
    }

    #[test]
    fn uniform_weights_are_ones() {
        let s = Shape::cubic(3, 6).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Cosine, 1).unwrap();
        let w = make_weight_vectors(&m, WeightKind::Uniform, 0).unwrap();
        for l in 0..3 {
            assert!(w.mode(l).iter().all(|&x| x == 1.0));
        }
        assert_eq!(w.inner_products().len(), 3);
    }

    #[test]
    fn latent_combination_is_aligned_with_factors() {
        let s = Shape::cubic(3, 200).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0, 0.8], FactorFamily::Cosine, 4).unwrap();
        let w = make_weight_vectors(&m, WeightKind::LatentCombination(vec![1.0, 1.0]), 0).unwrap();
        for l in 0..3 {
            assert!(w.mode(l).iter().all(|x| x.abs() <= 1.0));
            for k in 0..2 {
                // direct inner product: (1/n) Σ_i Q(i,k) W(i)
                let q = m.factor(l);
                let direct: f64 = (0..200).map(|i| q[(i, k)] * w.mode(l)[i]).sum::<f64>() / 200.0;
                assert!((direct - w.inner_products()[l][k]).abs() < 1e-12);
                assert!(w.inner_products()[l][k].abs() > 0.2);
            }
        }
    }

    #[test]
    fn rademacher_with_uniform_weights_has_vanishing_inner_product() {
        let s = Shape::cubic(3, 10_000).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Rademacher { bias: 0.0 }, 8).unwrap();
        let w = make_weight_vectors(&m, WeightKind::Uniform, 0).unwrap();
        for l in 0..3 {
            assert!(w.inner_products()[l][0].abs() < 4.0 / 100.0);
        }
    }

    #[test]
    fn custom_weights_validated() {
        let s = Shape::cubic(3, 3).unwrap();
        let m = TuckerModel::orthogonal_cp(s, &[1.0], FactorFamily::Cosine, 1).unwrap();
        assert!(make_weight_vectors(&m, WeightKind::Custom(vec![vec![1.0; 3]; 2]), 0).is_err());
        assert!(make_weight_vectors(&m, WeightKind::Custom(vec![vec![1.0, 2.0, 0.0]; 3]), 0).is_err());
        assert!(make_weight_vectors(&m, WeightKind::Custom(vec![vec![1.0, -1.0, 0.0]; 3]), 0).is_ok());
    }

    #[test]
    fn xor_all_plus_has_expected_value_seven_eighths() {
        let inst = XorInstance::from_theta(vec![1.0; 4]).unwrap();
        for v in inst.model().dense(64).unwrap() {
            assert_eq!(v, 7.0 / 8.0);
        }
        // Monte Carlo on the observation factory
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..400 {
            let obs = inst.observe(1.0, seed).unwrap();
            sum += obs.values().iter().sum::<f64>();
            count += obs.len();
        }
        let mean = sum / count as f64;
        // each value has variance 1 - (7/8)^2
        let sd = (1.0f64 - 49.0 / 64.0).sqrt() / (count as f64).sqrt();
        assert!((mean - 0.875).abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn xor_mean_theta_by_hand() {
        let inst = XorInstance::from_theta(vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(inst.mean_theta(), 0.5);
    }

    #[test]
    fn xor_bias_validation() {
        assert!(make_xor_hard_instance(10, 0.6, 0).is_err());
        assert!(make_xor_hard_instance(10, -0.1, 0).is_err());
    }

    #[test]
    fn xor_mean_theta_scales_as_inverse_root_n() {
        let n = 10_000usize;
        let mut abs_means: Vec<f64> = (0..50)
            .map(|seed| make_xor_hard_instance(n, 0.0, seed).unwrap().mean_theta().abs())
            .collect();
        abs_means.sort_by(f64::total_cmp);
        let median = (abs_means[24] + abs_means[25]) / 2.0;
        let scale = 1.0 / (n as f64).sqrt();
        assert!(median > scale / 2.0 && median < scale * 2.0, "median {median}");
    }

    proptest! {
        #[test]
        fn model_values_bounded(n in 2usize..7, r in 1usize..3, seed in any::<u64>(), fam in 0u8..4) {
            let family = match fam {
                0 => FactorFamily::Constant,
                1 => FactorFamily::Cosine,
                2 => FactorFamily::ShiftedCosine,
                _ => FactorFamily::Rademacher { bias: 0.1 },
            };
            let r = r.min(n);
            let s = Shape::cubic(3, n).unwrap();
            let lambdas: Vec<f64> = (0..r).map(|k| 1.0 + k as f64).collect();
            let m = TuckerModel::orthogonal_cp(s, &lambdas, family, seed).unwrap();
            for v in m.dense(1000).unwrap() {
                prop_assert!(v.abs() <= 1.0 + 1e-12);
            }
            let obs = sample_observations(&m.with_noise_headroom(0.1).unwrap(), 0.5, 0.1, seed).unwrap();
            prop_assert!(obs.values().iter().all(|v| v.abs() <= 1.0));
        }
    }
}
