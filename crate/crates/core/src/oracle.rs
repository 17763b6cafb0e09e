//! Exact reference computations for small instances.
//!
//! Everything here has access to the ground-truth model and is meant for
//! tests, diagnostics and baselines, not for estimation.

use alloc::vec;
use alloc::vec::Vec;

use crate::collapse::CollapsedMatrix;
use crate::linalg::{jacobi_svd, CompensatedSum, Matrix};
use crate::nn_estimator::{kernel, Estimate, EstimatorConfig, Fallback};
use crate::spectral_distance::{neighborhood_vector, BfsForest, DistanceMatrix, SparseVector};
use crate::tensor_model::{SparseObservations, TuckerModel, WeightVectors};
use crate::{Error, Result};

/// Size limit of the direct expected-collapse sum.
pub const DIRECT_COLLAPSE_LIMIT: usize = 1_000_000;
/// Size limit of the exhaustive nearest-neighbour oracle.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;
/// Largest matrix dimension accepted by the USVT baseline.
pub const USVT_LIMIT: usize = 500;
/// Default singular value threshold multiplier of the USVT baseline.
pub const USVT_DEFAULT_MULT: f64 = 2.02;

/// The `r × r` matrix coupling `Q_y` and `Q_z` after weight-averaging the
/// other modes, with its SVD `Λ̂ = Û diag(σ̂) V̂ᵀ`.
#[derive(Debug, Clone)]
pub struct LambdaHat {
    pub mode_pair: (usize, usize),
    pub matrix: Matrix,
    pub singular_values: Vec<f64>,
    pub u: Matrix,
    pub v: Matrix,
    pub condition_number: f64,
}

/// `mean_i Q_ℓ(i, k) W_ℓ(i)` for every `ℓ` and `k`.
fn weighted_factor_means(model: &TuckerModel, weights: &WeightVectors) -> Vec<Vec<f64>> {
    let shape = model.shape();
    (0..shape.order())
        .map(|l| {
            let q = model.factor(l);
            let w = weights.mode(l);
            (0..model.rank())
                .map(|k| {
                    let s: CompensatedSum = (0..q.rows()).map(|i| q[(i, k)] * w[i]).collect();
                    s.value() / q.rows() as f64
                })
                .collect()
        })
        .collect()
}

fn check_weights(model: &TuckerModel, weights: &WeightVectors) -> Result<()> {
    if weights.matches(model.shape()) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch("weight vectors do not match model shape".into()))
    }
}

/// `Λ̂(a, b) = Σ_{k_y = a, k_z = b} Λ(k) Π_{ℓ∉{y,z}} mean_i Q_ℓ(i, k_ℓ) W_ℓ(i)`
/// on the realised latents.
pub fn exact_hat_lambda(model: &TuckerModel, weights: &WeightVectors, y: usize, z: usize) -> Result<LambdaHat> {
    model.shape().check_mode_pair(y, z)?;
    check_weights(model, weights)?;
    let r = model.rank();
    let t = model.shape().order();
    let means = weighted_factor_means(model, weights);
    let core = model.core();
    let mut sums = vec![CompensatedSum::new(); r * r];
    let mut k = vec![0usize; t];
    for (offset, &lambda) in core.data().iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        core.unravel(offset, &mut k);
        let mut term = lambda;
        for l in (0..t).filter(|&l| l != y && l != z) {
            term *= means[l][k[l]];
        }
        sums[k[y] * r + k[z]].add(term);
    }
    let matrix = Matrix::from_fn(r, r, |a, b| sums[a * r + b].value());
    let svd = jacobi_svd(&matrix);
    let smax = svd.singular_values[0];
    let smin = svd.singular_values[r - 1];
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(LambdaHat {
        mode_pair: (y, z),
        matrix,
        singular_values: svd.singular_values,
        u: svd.u,
        v: svd.v,
        condition_number,
    })
}

/// Noiseless, fully observed collapsed matrix.
#[derive(Debug, Clone)]
pub struct ExpectedCollapse {
    /// `(1 / Π_{ℓ∉{y,z}} n_ℓ) Σ_{i ∈ I_yz(a,b)} T(i) Π_{ℓ∉{y,z}} W_ℓ(i_ℓ)`;
    /// `None` when the tensor exceeds [`DIRECT_COLLAPSE_LIMIT`].
    pub direct: Option<Matrix>,
    /// `Q_y Λ̂ Q_zᵀ`.
    pub factored: Matrix,
}

impl ExpectedCollapse {
    /// The direct sum when available, otherwise the factored form.
    pub fn best(&self) -> &Matrix {
        self.direct.as_ref().unwrap_or(&self.factored)
    }

    /// Largest entrywise disagreement of the two forms, if both ran.
    pub fn agreement(&self) -> Option<f64> {
        self.direct.as_ref().map(|d| d.max_abs_diff(&self.factored))
    }
}

pub fn exact_expected_collapse(
    model: &TuckerModel,
    weights: &WeightVectors,
    y: usize,
    z: usize,
) -> Result<ExpectedCollapse> {
    let lh = exact_hat_lambda(model, weights, y, z)?;
    let factored = model.factor(y).matmul(&lh.matrix).matmul(&model.factor(z).transpose());
    let shape = model.shape();
    let direct = if shape.numel() <= DIRECT_COLLAPSE_LIMIT {
        let (n_y, n_z) = (shape.dim(y), shape.dim(z));
        let mut sums = vec![CompensatedSum::new(); n_y * n_z];
        let mut idx = vec![0usize; shape.order()];
        for lin in 0..shape.numel() {
            shape.unravel_into(lin, &mut idx);
            let mut term = model.evaluate_unchecked(&idx);
            for (l, &i) in idx.iter().enumerate() {
                if l != y && l != z {
                    term *= weights.mode(l)[i];
                }
            }
            sums[idx[y] * n_z + idx[z]].add(term);
        }
        let m = shape.complement_size(y, z) as f64;
        Some(Matrix::from_fn(n_y, n_z, |a, b| sums[a * n_z + b].value() / m))
    } else {
        None
    };
    Ok(ExpectedCollapse { direct, factored })
}

/// `Q̃ = Q W` for a factor `Q` (n × r) and rotation `W` (r × r).
fn rotated(q: &Matrix, w: &Matrix) -> Matrix {
    q.matmul(w)
}

/// `‖diag(σ̂)^(s+1) Q̃_yᵀ (e_a - e_b)‖²` with `Q̃_y = Q_y Û`.
pub fn exact_latent_distance(model: &TuckerModel, lambda_hat: &LambdaHat, s: usize, a: usize, b: usize) -> Result<f64> {
    let (y, _) = lambda_hat.mode_pair;
    let n = model.shape().dim(y);
    for i in [a, b] {
        if i >= n {
            return Err(Error::IndexOutOfRange { mode: y, index: i, size: n });
        }
    }
    let qt = rotated(model.factor(y), &lambda_hat.u);
    let mut acc = CompensatedSum::new();
    for (k, &sigma) in lambda_hat.singular_values.iter().enumerate() {
        let diff = libm::pow(sigma, (s + 1) as f64) * (qt[(a, k)] - qt[(b, k)]);
        acc.add(diff * diff);
    }
    Ok(acc.value())
}

/// `x ↦ Q̃ᵀ x` for a sparse `x`.
fn project_sparse(qt: &Matrix, x: &SparseVector) -> Vec<f64> {
    let mut out = vec![0.0; qt.cols()];
    for (i, v) in x.iter() {
        for (k, o) in out.iter_mut().enumerate() {
            *o += v * qt[(i, k)];
        }
    }
    out
}

/// Noiseless expectation of the pair statistic: `Ñ_{a,s}ᵀ Q̃_y diag(σ̂) Q̃_zᵀ
/// Ñ_{b,s+1}` for even `s`, with the roles of `y` and `z` exchanged for odd
/// `s`.
pub fn exact_pair_statistic(
    model: &TuckerModel,
    lambda_hat: &LambdaHat,
    fa: &BfsForest,
    fb: &BfsForest,
    s: usize,
) -> Result<f64> {
    let (y, z) = lambda_hat.mode_pair;
    let qy = rotated(model.factor(y), &lambda_hat.u);
    let qz = rotated(model.factor(z), &lambda_hat.v);
    let va = neighborhood_vector(fa, s)?;
    let vb = neighborhood_vector(fb, s + 1)?;
    let (left, right) = if s % 2 == 0 { (&qy, &qz) } else { (&qz, &qy) };
    let pa = project_sparse(left, &va);
    let pb = project_sparse(right, &vb);
    Ok(pa
        .iter()
        .zip(&pb)
        .zip(&lambda_hat.singular_values)
        .map(|((x, y), s)| x * s * y)
        .sum())
}

/// Literal double loop over entries and observations of the threshold-kernel
/// estimator.
pub fn brute_force_nn(obs3: &SparseObservations, distances: &[DistanceMatrix], config: &EstimatorConfig) -> Result<Estimate> {
    let shape = obs3.shape().clone();
    let numel = shape.numel();
    if numel > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            what: "brute-force estimate",
            size: numel,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if distances.len() != shape.order() || distances.iter().zip(shape.dims()).any(|(d, &n)| d.len() != n) {
        return Err(Error::ShapeMismatch("distance matrices do not match the shape".into()));
    }
    let fill = match config.fallback() {
        Fallback::GlobalMean => obs3.mean().ok_or(Error::NoObservations("third sample is empty"))?,
        Fallback::Unestimated => f64::NAN,
    };
    let mut values = Vec::with_capacity(numel);
    let mut support = Vec::with_capacity(numel);
    let mut flags = Vec::with_capacity(numel);
    let mut i = vec![0usize; shape.order()];
    for lin in 0..numel {
        shape.unravel_into(lin, &mut i);
        let mut num = 0.0;
        let mut den = 0u32;
        for (j, v) in obs3.iter() {
            if kernel(&i, j, distances, config.eta()) {
                num += v;
                den += 1;
            }
        }
        support.push(den);
        if den == 0 {
            values.push(fill);
            flags.push(true);
        } else {
            values.push(num / den as f64);
            flags.push(false);
        }
    }
    Estimate::from_parts(shape, config.eta(), values, support, flags)
}

/// Result of singular value thresholding.
#[derive(Debug, Clone)]
pub struct UsvtEstimate {
    pub matrix: Matrix,
    pub retained_rank: usize,
    pub threshold: f64,
}

/// Universal singular value thresholding of a collapsed matrix.
///
/// Unobserved cells are zero-filled; singular values of the filled matrix
/// below `threshold_mult · √(n p̂)` are discarded (`n` the larger side,
/// `p̂` the observed fraction), the rest rescaled by `1 / p̂` and the result
/// clipped to `[-1, 1]`.
pub fn usvt_baseline(m: &CollapsedMatrix, threshold_mult: f64) -> Result<UsvtEstimate> {
    let n = m.rows().max(m.cols());
    if n > USVT_LIMIT {
        return Err(Error::SizeGuard {
            what: "USVT",
            size: n,
            limit: USVT_LIMIT,
        });
    }
    if !(threshold_mult >= 0.0) {
        return Err(Error::InvalidParameter("USVT threshold multiplier must be non-negative".into()));
    }
    let p_hat = crate::collapse::empirical_density(m);
    if p_hat == 0.0 {
        return Ok(UsvtEstimate {
            matrix: Matrix::zeros(m.rows(), m.cols()),
            retained_rank: 0,
            threshold: 0.0,
        });
    }
    let filled = m.to_dense(0.0);
    let svd = jacobi_svd(&filled);
    let threshold = threshold_mult * libm::sqrt(n as f64 * p_hat);
    let rank = svd.singular_values.iter().take_while(|&&s| s >= threshold && s > 0.0).count();
    let mut out = svd.reconstruct_rank(rank);
    for a in 0..out.rows() {
        for b in 0..out.cols() {
            out[(a, b)] = (out[(a, b)] / p_hat).clamp(-1.0, 1.0);
        }
    }
    Ok(UsvtEstimate {
        matrix: out,
        retained_rank: rank,
        threshold,
    })
}
