//! Threshold-kernel nearest-neighbour averaging.
//!
//! An entry `i` is estimated by the mean of the third sample over entries
//! `i'` whose coordinates are all within `η` of `i` in the per-mode
//! estimated distances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::spectral_distance::DistanceMatrix;
use crate::tensor_model::{Shape, SparseObservations, TuckerModel};
use crate::{Error, Result};

/// Largest dense output the estimator will allocate.
pub const DENSE_LIMIT: usize = 64_000_000;

/// How the bandwidth `η` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    Manual(f64),
    /// `c · max(n^(-κ/2), n^(-2(κ+1)/(t+2)))`.
    AlgorithmRule { c: f64 },
    /// `c · max(√(ln(n²) / (n p̃)), ln(n^(t+1))^(2/(t+2)) / n^(2(κ+1)/(t+2)))`.
    AnalysisRule { c: f64 },
}

impl EtaRule {
    pub fn resolve(&self, n: usize, t: usize, kappa: f64, ptilde: f64) -> Result<f64> {
        match *self {
            EtaRule::Manual(eta) if eta > 0.0 => Ok(eta),
            EtaRule::Manual(eta) => Err(Error::InvalidParameter(format!("eta must be positive, got {eta}"))),
            EtaRule::AlgorithmRule { c } => choose_eta(n, t, kappa, c),
            EtaRule::AnalysisRule { c } => analysis_eta(n, t, kappa, ptilde, c),
        }
    }
}

/// What to report for entries with no kernel neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    #[default]
    GlobalMean,
    /// Leave the entry as `NaN`.
    Unestimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    eta: f64,
    fallback: Fallback,
}

impl EstimatorConfig {
    pub fn new(eta: f64, fallback: Fallback) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { eta, fallback })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn fallback(&self) -> Fallback {
        self.fallback
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")))
    }
}

fn check_multiplier(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta multiplier must be positive, got {c}")))
    }
}

/// `c · max(n^(-κ/2), n^(-2(κ+1)/(t+2)))`.
pub fn choose_eta(n: usize, t: usize, kappa: f64, c: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_multiplier(c)?;
    let nf = n as f64;
    let a = libm::pow(nf, -kappa / 2.0);
    let b = libm::pow(nf, -2.0 * (kappa + 1.0) / (t as f64 + 2.0));
    Ok(c * a.max(b))
}

/// Bandwidth balancing the two error terms of the entrywise bound, with
/// their logarithmic factors.
pub fn analysis_eta(n: usize, t: usize, kappa: f64, ptilde: f64, c: f64) -> Result<f64> {
    check_kappa(kappa)?;
    check_multiplier(c)?;
    if !(ptilde > 0.0 && ptilde <= 1.0) {
        return Err(Error::InvalidDensity(ptilde));
    }
    let nf = n as f64;
    let tf = t as f64;
    let a = libm::sqrt(libm::log(nf * nf) / (nf * ptilde));
    let b = libm::pow(libm::log(libm::pow(nf, tf + 1.0)), 2.0 / (tf + 2.0))
        / libm::pow(nf, 2.0 * (kappa + 1.0) / (tf + 2.0));
    Ok(c * a.max(b))
}

/// `κ̂ = ln(p n^(t-1)) / ln n`, the exponent with `p = n^(-(t-1)+κ)`.
pub fn infer_kappa(n: usize, p: f64, t: usize) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidDensity(p));
    }
    let ln_n = libm::log(n as f64);
    Ok((libm::log(p) + (t as f64 - 1.0) * ln_n) / ln_n)
}

fn check_distances(shape: &Shape, distances: &[DistanceMatrix]) -> Result<()> {
    if distances.len() != shape.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} distance matrices for an order-{} tensor",
            distances.len(),
            shape.order()
        )));
    }
    for (l, d) in distances.iter().enumerate() {
        if d.len() != shape.dim(l) {
            return Err(Error::ShapeMismatch(format!(
                "distance matrix for mode {l} has size {}, mode has {}",
                d.len(),
                shape.dim(l)
            )));
        }
    }
    Ok(())
}

/// `Π_ℓ 1{d_ℓ(i_ℓ, j_ℓ) ≤ η}`; invalid pairs fail the test.
pub fn kernel(i: &[usize], j: &[usize], distances: &[DistanceMatrix], eta: f64) -> bool {
    i.iter()
        .zip(j)
        .zip(distances)
        .all(|((&a, &b), d)| d.get(a, b).is_some_and(|v| v <= eta))
}

/// Dense estimate with per-entry support and fallback flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    shape: Shape,
    eta: f64,
    values: Vec<f64>,
    support: Vec<u32>,
    fallback: Vec<bool>,
}

impl Estimate {
    /// Assembles an estimate from its parts, e.g. when read back from a dump.
    pub fn from_parts(shape: Shape, eta: f64, values: Vec<f64>, support: Vec<u32>, fallback: Vec<bool>) -> Result<Self> {
        let n = shape.numel();
        for got in [values.len(), support.len(), fallback.len()] {
            if got != n {
                return Err(Error::LengthMismatch { expected: n, got });
            }
        }
        Ok(Self {
            shape,
            eta,
            values,
            support,
            fallback,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Row-major values, last mode fastest.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_counts(&self) -> &[u32] {
        &self.support
    }

    pub fn fallback_mask(&self) -> &[bool] {
        &self.fallback
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.values[self.shape.linear_index(index)])
    }

    pub fn fallback_fraction(&self) -> f64 {
        self.fallback.iter().filter(|&&f| f).count() as f64 / self.fallback.len().max(1) as f64
    }

    /// Bitwise equality of values, support counts and flags.
    pub fn same_content(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self.support == other.support
            && self.fallback == other.fallback
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub(crate) fn fallback_value(obs3: &SparseObservations, fallback: Fallback) -> Result<f64> {
    match fallback {
        Fallback::GlobalMean => obs3.mean().ok_or(Error::NoObservations("third sample is empty")),
        Fallback::Unestimated => Ok(f64::NAN),
    }
}

/// Finalises running sums into an estimate value, applying the fallback.
pub(crate) fn finish(sum: f64, count: u32, fallback: f64) -> (f64, bool) {
    if count == 0 {
        (fallback, true)
    } else {
        (sum / count as f64, false)
    }
}

/// Per-mode sorted lists `{b : d_ℓ(a, b) ≤ η}`.
fn neighbour_lists(distances: &[DistanceMatrix], eta: f64) -> Vec<Vec<Vec<usize>>> {
    distances
        .iter()
        .map(|d| {
            (0..d.len())
                .map(|a| (0..d.len()).filter(|&b| d.get(a, b).is_some_and(|v| v <= eta)).collect())
                .collect()
        })
        .collect()
}

/// Nearest-neighbour estimate of every entry from the third sample.
///
/// Each observation is scattered, in sorted order, into all entries whose
/// kernel with it is 1, so every entry accumulates its neighbours in the
/// same order as a direct loop over the sample.
pub fn estimate(obs3: &SparseObservations, distances: &[DistanceMatrix], config: &EstimatorConfig) -> Result<Estimate> {
    let shape = obs3.shape().clone();
    check_distances(&shape, distances)?;
    let numel = shape.numel();
    if numel > DENSE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense estimate",
            size: numel,
            limit: DENSE_LIMIT,
        });
    }
    let fill = fallback_value(obs3, config.fallback)?;
    let lists = neighbour_lists(distances, config.eta);
    let t = shape.order();
    // row-major strides
    let mut strides = vec![1usize; t];
    for l in (0..t - 1).rev() {
        strides[l] = strides[l + 1] * shape.dim(l + 1);
    }

    let mut sums = vec![0.0f64; numel];
    let mut counts = vec![0u32; numel];
    let mut cursor = vec![0usize; t];
    for (idx, v) in obs3.iter() {
        let nbrs: Vec<&[usize]> = (0..t).map(|l| lists[l][idx[l]].as_slice()).collect();
        if nbrs.iter().any(|s| s.is_empty()) {
            continue;
        }
        // odometer over the Cartesian product of neighbour lists
        cursor.iter_mut().for_each(|c| *c = 0);
        'outer: loop {
            let lin: usize = (0..t).map(|l| nbrs[l][cursor[l]] * strides[l]).sum();
            sums[lin] += v;
            counts[lin] += 1;
            let mut l = t;
            loop {
                if l == 0 {
                    break 'outer;
                }
                l -= 1;
                cursor[l] += 1;
                if cursor[l] < nbrs[l].len() {
                    break;
                }
                cursor[l] = 0;
            }
        }
    }

    let mut values = Vec::with_capacity(numel);
    let mut flags = Vec::with_capacity(numel);
    for (&s, &c) in sums.iter().zip(&counts) {
        let (v, f) = finish(s, c, fill);
        values.push(v);
        flags.push(f);
    }
    Ok(Estimate {
        shape,
        eta: config.eta,
        values,
        support: counts,
        fallback: flags,
    })
}

/// Estimates at selected entries only: `(value, support, fallback)` per query.
pub fn estimate_at(
    obs3: &SparseObservations,
    distances: &[DistanceMatrix],
    config: &EstimatorConfig,
    queries: &[Vec<usize>],
) -> Result<Vec<(f64, u32, bool)>> {
    let shape = obs3.shape();
    check_distances(shape, distances)?;
    let fill = fallback_value(obs3, config.fallback)?;
    queries
        .iter()
        .map(|q| {
            shape.check_index(q)?;
            let mut sum = 0.0;
            let mut count = 0u32;
            for (idx, v) in obs3.iter() {
                if kernel(q, idx, distances, config.eta) {
                    sum += v;
                    count += 1;
                }
            }
            let (v, f) = finish(sum, count, fill);
            Ok((v, count, f))
        })
        .collect()
}

/// Entrywise error summary. Entries left unestimated (`NaN`) are skipped
/// and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub max_abs_error: f64,
    pub mse: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl ErrorMetrics {
    /// From `(estimate, truth)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut max_abs: f64 = 0.0;
        let mut sq = crate::linalg::CompensatedSum::new();
        let mut evaluated = 0;
        let mut skipped = 0;
        for (est, truth) in pairs {
            if est.is_nan() {
                skipped += 1;
                continue;
            }
            let e = est - truth;
            max_abs = max_abs.max(libm::fabs(e));
            sq.add(e * e);
            evaluated += 1;
        }
        let mse = if evaluated == 0 { f64::NAN } else { sq.value() / evaluated as f64 };
        let max_abs_error = if evaluated == 0 { f64::NAN } else { max_abs };
        Self {
            max_abs_error,
            mse,
            evaluated,
            skipped,
        }
    }
}

/// Max absolute error and MSE of a dense estimate against the model.
pub fn error_metrics(estimate: &Estimate, model: &TuckerModel) -> Result<ErrorMetrics> {
    if estimate.shape() != model.shape() {
        return Err(Error::ShapeMismatch("estimate and model shapes differ".into()));
    }
    let shape = model.shape();
    let mut idx = vec![0usize; shape.order()];
    Ok(ErrorMetrics::from_pairs(estimate.values.iter().enumerate().map(|(lin, &v)| {
        shape.unravel_into(lin, &mut idx);
        (v, model.evaluate_unchecked(&idx))
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_model::{FactorFamily, Shape, TuckerModel};
    use proptest::prelude::*;

    fn all_pairs(n: usize, f: impl Fn(usize, usize) -> Option<f64>) -> DistanceMatrix {
        let pairs: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .map(|(a, b)| match f(a, b) {
                Some(v) => (a, b, v, true),
                None => (a, b, f64::NAN, false),
            })
            .collect();
        DistanceMatrix::from_pairs(0, n, pairs).unwrap()
    }

    fn dist_by_gap(n: usize) -> DistanceMatrix {
        all_pairs(n, |a, b| Some((b - a) as f64 * 0.1))
    }

    fn random_obs(shape: &Shape, seed: u64, p: f64) -> SparseObservations {
        let model = TuckerModel::orthogonal_cp(shape.clone(), &[1.0, 0.5], FactorFamily::ShiftedCosine, seed).unwrap();
        crate::tensor_model::sample_observations(&model, p, 0.0, seed).unwrap()
    }

    #[test]
    fn eta_rule_examples() {
        let e = choose_eta(100, 3, 0.5, 1.0).unwrap();
        assert!((e - 0.316_227_766_016_837_94).abs() < 1e-12);
        assert_eq!(choose_eta(100, 3, 0.5, 2.0).unwrap(), 2.0 * e);
        assert!((choose_eta(100, 3, 1.0, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(choose_eta(100, 3, 0.0, 1.0).is_err());
        assert!(choose_eta(100, 3, -0.5, 1.0).is_err());
        assert!(EstimatorConfig::new(0.0, Fallback::GlobalMean).is_err());
    }

    #[test]
    fn analysis_rule_is_positive_and_decreasing() {
        let a = analysis_eta(100, 3, 0.6, 0.5, 1.0).unwrap();
        let b = analysis_eta(10_000, 3, 0.6, 0.5, 1.0).unwrap();
        assert!(a > b && b > 0.0);
    }

    #[test]
    fn inferred_kappa_round_trips() {
        for kappa in [0.3, 0.5, 0.9] {
            let p = libm::pow(50.0, -2.0 + kappa);
            assert!((infer_kappa(50, p, 3).unwrap() - kappa).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_examples() {
        let d = [dist_by_gap(4), dist_by_gap(4), dist_by_gap(4)];
        assert!(kernel(&[1, 2, 3], &[1, 2, 3], &d, 1e-9));
        assert!(kernel(&[0, 0, 0], &[1, 1, 1], &d, 0.1));
        assert!(!kernel(&[0, 0, 0], &[1, 1, 2], &d, 0.1));
        let invalid = [all_pairs(4, |_, _| None), dist_by_gap(4), dist_by_gap(4)];
        assert!(!kernel(&[0, 0, 0], &[1, 0, 0], &invalid, 1e9));
        assert!(kernel(&[2, 0, 0], &[2, 0, 0], &invalid, 1e-9));
    }

    #[test]
    fn constant_tensor_is_recovered_exactly() {
        let s = Shape::cubic(3, 5).unwrap();
        let m = TuckerModel::orthogonal_cp(s.clone(), &[0.625], FactorFamily::Constant, 0).unwrap();
        let obs = crate::tensor_model::sample_observations(&m, 0.2, 0.0, 4).unwrap();
        let c = obs.value(0);
        let d = [dist_by_gap(5), dist_by_gap(5), dist_by_gap(5)];
        let est = estimate(&obs, &d, &EstimatorConfig::new(0.15, Fallback::GlobalMean).unwrap()).unwrap();
        assert!(est.values().iter().all(|&v| v == c));
        let metrics = error_metrics(&est, &m).unwrap();
        assert_eq!((metrics.max_abs_error, metrics.mse), (0.0, 0.0));
    }

    #[test]
    fn huge_eta_gives_global_mean() {
        let s = Shape::cubic(3, 4).unwrap();
        let obs = random_obs(&s, 2, 0.4);
        let d = [dist_by_gap(4), dist_by_gap(4), dist_by_gap(4)];
        let est = estimate(&obs, &d, &EstimatorConfig::new(1e9, Fallback::Unestimated).unwrap()).unwrap();
        let mut sum = 0.0;
        for &v in obs.values() {
            sum += v;
        }
        let mean = sum / obs.len() as f64;
        assert!(est.values().iter().all(|&v| v == mean));
        assert!(est.support_counts().iter().all(|&c| c as usize == obs.len()));
    }

    #[test]
    fn empty_sample_fallbacks() {
        let s = Shape::cubic(3, 3).unwrap();
        let obs = SparseObservations::empty(s, 0.1, 0);
        let d = [dist_by_gap(3), dist_by_gap(3), dist_by_gap(3)];
        let err = estimate(&obs, &d, &EstimatorConfig::new(1.0, Fallback::GlobalMean).unwrap());
        assert!(matches!(err, Err(Error::NoObservations(_))));
        let est = estimate(&obs, &d, &EstimatorConfig::new(1.0, Fallback::Unestimated).unwrap()).unwrap();
        assert!(est.fallback_mask().iter().all(|&f| f));
        assert!(est.values().iter().all(|v| v.is_nan()));
        assert_eq!(est.fallback_fraction(), 1.0);
    }

    #[test]
    fn metrics_of_constant_shift() {
        let m = ErrorMetrics::from_pairs([(0.35, 0.25), (-0.4, -0.5), (f64::NAN, 0.0)]);
        assert!((m.max_abs_error - 0.1).abs() < 1e-12);
        assert!((m.mse - 0.01).abs() < 1e-12);
        assert_eq!((m.evaluated, m.skipped), (2, 1));
    }

    #[test]
    fn mismatched_distances_rejected() {
        let s = Shape::cubic(3, 3).unwrap();
        let obs = random_obs(&s, 0, 0.5);
        let cfg = EstimatorConfig::new(1.0, Fallback::GlobalMean).unwrap();
        assert!(estimate(&obs, &[dist_by_gap(3), dist_by_gap(3)], &cfg).is_err());
        assert!(estimate(&obs, &[dist_by_gap(3), dist_by_gap(4), dist_by_gap(3)], &cfg).is_err());
    }

    fn fuzz_distances(n: usize, seed: u64) -> Vec<DistanceMatrix> {
        (0..3u64)
            .map(|l| {
                all_pairs(n, |a, b| {
                    let h = crate::rng::splitmix64(seed ^ (l << 40) ^ ((a as u64) << 20) ^ b as u64);
                    if h % 11 == 0 {
                        None
                    } else {
                        Some((h >> 11) as f64 / (1u64 << 53) as f64)
                    }
                })
            })
            .collect()
    }

    proptest! {
        #[test]
        fn output_is_convex_combination(seed in any::<u64>(), eta in 0.05f64..1.0, n in 2usize..6) {
            let s = Shape::cubic(3, n).unwrap();
            let obs = random_obs(&s, seed, 0.3);
            prop_assume!(!obs.is_empty());
            let d = fuzz_distances(n, seed);
            let est = estimate(&obs, &d, &EstimatorConfig::new(eta, Fallback::GlobalMean).unwrap()).unwrap();
            let lo = obs.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = obs.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for ((&v, &f), &c) in est.values().iter().zip(est.fallback_mask()).zip(est.support_counts()) {
                prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
                prop_assert!(v.abs() <= 1.0);
                prop_assert!(f || c >= 1);
            }
        }

        #[test]
        fn support_grows_with_eta(seed in any::<u64>(), e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let s = Shape::cubic(3, 4).unwrap();
            let obs = random_obs(&s, seed, 0.3);
            let d = fuzz_distances(4, seed);
            let a = estimate(&obs, &d, &EstimatorConfig::new(lo, Fallback::Unestimated).unwrap()).unwrap();
            let b = estimate(&obs, &d, &EstimatorConfig::new(hi, Fallback::Unestimated).unwrap()).unwrap();
            for (x, y) in a.support_counts().iter().zip(b.support_counts()) {
                prop_assert!(x <= y);
            }
        }

        #[test]
        fn relabelling_a_mode_permutes_the_estimate(seed in any::<u64>(), shift in 1usize..5) {
            let n = 5;
            let s = Shape::cubic(3, n).unwrap();
            let obs = random_obs(&s, seed, 0.3);
            prop_assume!(!obs.is_empty());
            let d = fuzz_distances(n, seed);
            let perm = |a: usize| (a + shift) % n;
            let moved: Vec<_> = obs.iter().map(|(i, v)| (vec![perm(i[0]), i[1], i[2]], v)).collect();
            let (obs_p, _) = SparseObservations::from_entries(s.clone(), moved, obs.density(), 0).unwrap();
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let (pa, pb) = (perm(a), perm(b));
                    let (x, y) = if pa < pb { (pa, pb) } else { (pb, pa) };
                    pairs.push((x, y, d[0].value(a, b), d[0].is_valid(a, b)));
                }
            }
            let d0 = DistanceMatrix::from_pairs(0, n, pairs).unwrap();
            let d_p = vec![d0, d[1].clone(), d[2].clone()];
            let cfg = EstimatorConfig::new(0.5, Fallback::GlobalMean).unwrap();
            let e = estimate(&obs, &d, &cfg).unwrap();
            let e_p = estimate(&obs_p, &d_p, &cfg).unwrap();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let x = e.get(&[a, b, c]).unwrap();
                        let y = e_p.get(&[perm(a), b, c]).unwrap();
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
