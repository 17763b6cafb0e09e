//! Running configured experiments.

use std::time::Instant;

use rayon::prelude::*;
use stc_core::collapse::induced_density;
use stc_core::linalg::Matrix;
use stc_core::nn_estimator::{error_metrics, estimate_at, EstimatorConfig, ErrorMetrics};
use stc_core::oracle::{exact_expected_collapse, exact_hat_lambda, usvt_baseline, USVT_DEFAULT_MULT, USVT_LIMIT};
use stc_core::pipeline::{distance_stage, DistanceOptions, DistanceStage};
use stc_core::rng::{self, Purpose};
use stc_core::tensor_model::{
    make_weight_vectors, make_xor_hard_instance, sample_observations, CoreTensor, Shape, SparseObservations,
    TuckerModel, WeightVectors,
};

use crate::config::{ExperimentConfig, Regime};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("n = {n}, seed = {seed}: {source}")]
    Run {
        n: usize,
        seed: u64,
        source: stc_core::Error,
    },
    #[error("cannot build thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Metrics of one `(n, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub regime: Regime,
    pub n: usize,
    pub seed: u64,
    pub kappa: f64,
    pub max_abs_error: f64,
    pub mse: f64,
    pub fallback_fraction: f64,
    /// Mean observed fraction of the collapsed matrices.
    pub ptilde: f64,
    /// Condition number of `Λ̂` for the mode pair `(0, 1)`.
    pub condition_number: f64,
    /// Root-mean-square error of the USVT-completed first collapsed matrix
    /// against its expectation, when requested.
    pub usvt_error: Option<f64>,
    pub eta: f64,
    pub eta_multiplier: Option<f64>,
    pub depth: usize,
    /// Metrics computed on sampled entries rather than the whole tensor.
    pub sampled: bool,
    /// `⟨θ, 1/n · 1⟩` for planted instances.
    pub mean_theta: Option<f64>,
    pub wall_ms: f64,
    pub timings: Vec<(&'static str, f64)>,
}

/// Ground truth and data of one run.
pub struct Instance {
    pub model: TuckerModel,
    pub weights: WeightVectors,
    pub observations: SparseObservations,
    pub mean_theta: Option<f64>,
}

/// Seed of the run `(n, seed)`; all randomness of the run derives from it.
pub fn run_seed(n: usize, seed: u64) -> u64 {
    rng::derive_indexed(seed, n as u64)
}

fn lambdas(r: usize) -> Vec<f64> {
    (0..r).map(|k| 1.0 / (k + 1) as f64).collect()
}

pub fn build_instance(config: &ExperimentConfig, n: usize, seed: u64) -> stc_core::Result<Instance> {
    let master = run_seed(n, seed);
    let shape = Shape::cubic(config.t, n)?;
    let p = config.density(n);
    let family = config.factor_family();
    let (model, observations, mean_theta) = match config.regime {
        Regime::XorHardness => {
            let inst = make_xor_hard_instance(n, config.bias, master)?;
            let obs = inst.observe(p, master)?;
            (inst.model().clone(), obs, Some(inst.mean_theta()))
        }
        regime => {
            let model = match regime {
                Regime::GeneralTucker => {
                    TuckerModel::general_tucker(shape, CoreTensor::random(config.r, config.t, master), family, master)?
                }
                _ => TuckerModel::orthogonal_cp(shape, &lambdas(config.r), family, master)?,
            };
            let model = if config.noise_amplitude > 0.0 {
                model.with_noise_headroom(config.noise_amplitude)?
            } else {
                model
            };
            let obs = sample_observations(&model, p, config.noise_amplitude, master)?;
            (model, obs, None)
        }
    };
    let weights = make_weight_vectors(&model, config.weights(), master)?;
    Ok(Instance {
        model,
        weights,
        observations,
        mean_theta,
    })
}

/// Uniformly random entries used for sampled metrics.
pub fn metric_queries(shape: &Shape, count: usize, master: u64) -> Vec<Vec<usize>> {
    use rand::Rng;
    let mut rng = rng::stream(master, Purpose::Queries);
    (0..count)
        .map(|_| shape.dims().iter().map(|&n| rng.gen_range(0..n)).collect())
        .collect()
}

struct Scored {
    metrics: ErrorMetrics,
    fallback_fraction: f64,
    eta: f64,
    multiplier: Option<f64>,
}

fn score(
    config: &ExperimentConfig,
    inst: &Instance,
    stage: &DistanceStage,
    eta: f64,
    queries: Option<&[Vec<usize>]>,
) -> stc_core::Result<(ErrorMetrics, f64)> {
    let fallback = config.fallback();
    match queries {
        None => {
            let est = stage.estimate(eta, fallback)?;
            Ok((error_metrics(&est, &inst.model)?, est.fallback_fraction()))
        }
        Some(qs) => {
            let cfg = EstimatorConfig::new(eta, fallback)?;
            let out = estimate_at(stage.third_sample(), &stage.distances, &cfg, qs)?;
            let fb = out.iter().filter(|o| o.2).count() as f64 / out.len() as f64;
            let pairs = out.iter().zip(qs).map(|(o, q)| (o.0, inst.model.evaluate_unchecked(q)));
            Ok((ErrorMetrics::from_pairs(pairs), fb))
        }
    }
}

fn frobenius_rms(a: &Matrix, b: &Matrix) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        s += (x - y) * (x - y);
    }
    (s / a.as_slice().len() as f64).sqrt()
}

/// Runs the full pipeline for one `(n, seed)`.
pub fn run_single(config: &ExperimentConfig, n: usize, seed: u64, usvt: bool) -> Result<RunRecord, RunError> {
    let wrap = |source| RunError::Run { n, seed, source };
    let master = run_seed(n, seed);
    let start = Instant::now();
    let mut timings = Vec::new();
    let mut lap = {
        let mut last = Instant::now();
        move |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
            let now = Instant::now();
            timings.push((name, (now - last).as_secs_f64() * 1e3));
            last = now;
        }
    };

    let inst = build_instance(config, n, seed).map_err(wrap)?;
    lap("instance", &mut timings);
    let stage = distance_stage(&inst.observations, &inst.weights, master, DistanceOptions::default()).map_err(wrap)?;
    lap("distances", &mut timings);

    let shape = inst.model.shape();
    let sampled = shape.numel() > config.dense_limit;
    let queries = sampled.then(|| metric_queries(shape, config.metric_samples, master));
    let ptilde_theory = induced_density(config.density(n), shape, 0, 1).map_err(wrap)?;
    let multipliers: Vec<Option<f64>> = match config.eta_rule {
        crate::config::EtaRuleName::Manual => vec![None],
        _ => config.eta_multipliers.iter().map(|&c| Some(c)).collect(),
    };
    let mut best: Option<Scored> = None;
    for (rule, multiplier) in config.eta_rules().into_iter().zip(multipliers) {
        let eta = rule.resolve(n, config.t, config.kappa, ptilde_theory).map_err(wrap)?;
        let (metrics, fallback_fraction) = score(config, &inst, &stage, eta, queries.as_deref()).map_err(wrap)?;
        // NaN MSE (nothing estimated) never wins
        let better = match &best {
            None => true,
            Some(b) => metrics.mse < b.metrics.mse || (b.metrics.mse.is_nan() && !metrics.mse.is_nan()),
        };
        if better {
            best = Some(Scored {
                metrics,
                fallback_fraction,
                eta,
                multiplier,
            });
        }
    }
    let best = best.expect("at least one bandwidth");
    lap("estimate", &mut timings);

    let condition_number = exact_hat_lambda(&inst.model, &inst.weights, 0, 1)
        .map_err(wrap)?
        .condition_number;
    let usvt_error = if usvt && n <= USVT_LIMIT {
        let fit = usvt_baseline(&stage.collapsed[0], USVT_DEFAULT_MULT).map_err(wrap)?;
        let truth = exact_expected_collapse(&inst.model, &inst.weights, 0, 1).map_err(wrap)?;
        Some(frobenius_rms(&fit.matrix, truth.best()))
    } else {
        None
    };
    lap("oracles", &mut timings);

    Ok(RunRecord {
        regime: config.regime,
        n,
        seed,
        kappa: config.kappa,
        max_abs_error: best.metrics.max_abs_error,
        mse: best.metrics.mse,
        fallback_fraction: best.fallback_fraction,
        ptilde: stage.empirical_ptilde(),
        condition_number,
        usvt_error,
        eta: best.eta,
        eta_multiplier: best.multiplier,
        depth: stage.depth,
        sampled,
        mean_theta: inst.mean_theta,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        timings,
    })
}

/// Runs every `(n, seed)` of the config on `jobs` threads (0 = all cores).
/// Records are returned ordered by `n`, then by seed position.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize, usvt: bool) -> Result<Vec<RunRecord>, RunError> {
    let usvt = usvt || config.usvt;
    let tasks: Vec<(usize, u64)> = config
        .n_list
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, seed)| run_single(config, n, seed, usvt))
            .collect()
    })
}

/// Summary of one planted parity instance.
#[derive(Debug, Clone, PartialEq)]
pub struct HardnessRecord {
    pub n: usize,
    pub seed: u64,
    pub bias: f64,
    pub mean_theta: f64,
    /// `‖E[M_01]‖_F / n` under uniform weights.
    pub collapsed_norm: f64,
    pub condition_number: f64,
}

pub fn hardness_record(n: usize, bias: f64, seed: u64) -> stc_core::Result<HardnessRecord> {
    let inst = make_xor_hard_instance(n, bias, run_seed(n, seed))?;
    let w = WeightVectors::uniform(inst.model().shape());
    let expected = exact_expected_collapse(inst.model(), &w, 0, 1)?;
    let norm = expected.factored.frobenius_norm() / n as f64;
    let lh = exact_hat_lambda(inst.model(), &w, 0, 1)?;
    Ok(HardnessRecord {
        n,
        seed,
        bias,
        mean_theta: inst.mean_theta(),
        collapsed_norm: norm,
        condition_number: lh.condition_number,
    })
}
