//! Self-checks of the estimators against the exact oracles on one instance.

use stc_core::collapse::collapse;
use stc_core::linalg::Matrix;
use stc_core::nn_estimator::{estimate, EstimatorConfig, Fallback};
use stc_core::oracle::{brute_force_nn, exact_expected_collapse, exact_hat_lambda, exact_pair_statistic};
use stc_core::pipeline::{distance_stage, DistanceOptions};
use stc_core::spectral_distance::{bfs_neighborhood, build_graph, choose_depth, pair_statistic};
use stc_core::tensor_model::{sample_observations, FactorFamily, Shape, TuckerModel, WeightVectors};

use crate::experiment::run_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Largest `n` for which the collapse checks run on the dense tensor.
pub const MAX_CHECK_N: usize = 60;

pub fn run_oracle_check(n: usize, seed: u64) -> stc_core::Result<Vec<Check>> {
    if n > MAX_CHECK_N {
        return Err(stc_core::Error::SizeGuard {
            what: "oracle check",
            size: n,
            limit: MAX_CHECK_N,
        });
    }
    let master = run_seed(n, seed);
    let r = 2.min(n);
    let shape = Shape::cubic(3, n)?;
    let model = TuckerModel::orthogonal_cp(shape.clone(), &[1.0, 0.5][..r], FactorFamily::ShiftedCosine, master)?;
    let w = WeightVectors::uniform(&shape);
    let full = sample_observations(&model, 1.0, 0.0, master)?;
    let mut checks = Vec::new();

    let mut collapse_err: f64 = 0.0;
    let mut forms_err: f64 = 0.0;
    for (y, z) in [(0, 1), (1, 2), (2, 0)] {
        let m = collapse(&full, y, z, &w)?;
        let e = exact_expected_collapse(&model, &w, y, z)?;
        let dense = Matrix::from_fn(n, n, |a, b| m.value(a, b));
        collapse_err = collapse_err.max(dense.max_abs_diff(e.best()));
        forms_err = forms_err.max(e.agreement().unwrap_or(0.0));
    }
    checks.push(Check {
        name: "full collapse vs expectation",
        value: collapse_err,
        tolerance: 1e-10,
    });
    checks.push(Check {
        name: "direct vs factored expectation",
        value: forms_err,
        tolerance: 1e-10,
    });

    let lh = exact_hat_lambda(&model, &w, 0, 1)?;
    let sigma = Matrix::from_fn(r, r, |a, b| if a == b { lh.singular_values[a] } else { 0.0 });
    checks.push(Check {
        name: "hat-lambda SVD reconstruction",
        value: lh.u.matmul(&sigma).matmul(&lh.v.transpose()).max_abs_diff(&lh.matrix),
        tolerance: 1e-10,
    });

    let g = build_graph(&collapse(&full, 0, 1, &w)?);
    let s = choose_depth(n, 1.0, 3)?;
    let mut stat_err: f64 = 0.0;
    for (a, b) in [(0, 0), (0, n - 1), (n / 2, 1)] {
        let fa = bfs_neighborhood(&g, a, s)?;
        let fb = bfs_neighborhood(&g, b, s)?;
        let d = pair_statistic(&fa, &fb, &full, &w, (0, 1), s)?;
        stat_err = stat_err.max((d - exact_pair_statistic(&model, &lh, &fa, &fb, s)?).abs());
    }
    checks.push(Check {
        name: "pair statistic vs expectation",
        value: stat_err,
        tolerance: 1e-6,
    });

    let small = n.min(10);
    let shape_s = Shape::cubic(3, small)?;
    let model_s = TuckerModel::orthogonal_cp(shape_s.clone(), &[1.0], FactorFamily::ShiftedCosine, master)?;
    let obs = sample_observations(&model_s, 0.5, 0.0, master)?;
    let ws = WeightVectors::uniform(&shape_s);
    let stage = distance_stage(&obs, &ws, master, DistanceOptions::default())?;
    let mut mismatches = 0.0;
    for eta in [0.1, 0.5, 2.0] {
        let cfg = EstimatorConfig::new(eta, Fallback::Unestimated)?;
        let fast = estimate(stage.third_sample(), &stage.distances, &cfg)?;
        let slow = brute_force_nn(stage.third_sample(), &stage.distances, &cfg)?;
        if !fast.same_content(&slow) {
            mismatches += 1.0;
        }
    }
    checks.push(Check {
        name: "fast vs brute-force estimate mismatches",
        value: mismatches,
        tolerance: 0.0,
    });
    Ok(checks)
}
