use proptest::prelude::*;
use stc::formats::*;
use stc_core::collapse::collapse;
use stc_core::nn_estimator::{estimate, EstimatorConfig, Fallback};
use stc_core::spectral_distance::DistanceMatrix;
use stc_core::tensor_model::{sample_observations, FactorFamily, Shape, TuckerModel, WeightVectors};

fn observations(dims: Vec<usize>, p: f64, seed: u64) -> stc_core::tensor_model::SparseObservations {
    let shape = Shape::new(dims).unwrap();
    let model = TuckerModel::orthogonal_cp(shape, &[0.9], FactorFamily::ShiftedCosine, seed)
        .unwrap()
        .with_noise_headroom(0.05)
        .unwrap();
    sample_observations(&model, p, 0.05, seed).unwrap()
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..7, 3..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn observations_round_trip(d in dims(), p in 0.05f64..1.0, seed in any::<u64>()) {
        let obs = observations(d, p, seed);
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        prop_assert_eq!(read_observations(&buf[..]).unwrap(), obs);
    }

    #[test]
    fn collapsed_round_trip(d in dims(), p in 0.05f64..1.0, seed in any::<u64>()) {
        let obs = observations(d, p, seed);
        let m = collapse(&obs, 0, 2, &WeightVectors::uniform(obs.shape())).unwrap();
        let mut buf = Vec::new();
        write_collapsed(&mut buf, &m).unwrap();
        prop_assert!(read_collapsed(&buf[..]).unwrap().same_content(&m));
    }

    #[test]
    fn distances_round_trip(
        n in 2usize..9,
        vals in prop::collection::vec((-2.0f64..2.0, any::<bool>()), 36),
    ) {
        let mut it = vals.into_iter();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let (v, ok) = it.next().unwrap();
                pairs.push((a, b, v, ok));
            }
        }
        let d = DistanceMatrix::from_pairs(1, n, pairs).unwrap();
        let mut buf = Vec::new();
        write_distances(&mut buf, &d).unwrap();
        prop_assert!(read_distances(&buf[..]).unwrap().same_content(&d));
    }

    #[test]
    fn estimate_round_trip(d in prop::collection::vec(2usize..5, 3), p in 0.1f64..1.0, eta in 0.0f64..1.0, seed in any::<u64>()) {
        let obs = observations(d, p, seed);
        let dist: Vec<_> = obs
            .shape()
            .dims()
            .iter()
            .enumerate()
            .map(|(mode, &n)| {
                let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, ((a * 7 + b * 3) % 5) as f64 / 4.0, true)));
                DistanceMatrix::from_pairs(mode, n, pairs).unwrap()
            })
            .collect();
        let e = estimate(&obs, &dist, &EstimatorConfig::new(eta, Fallback::Unestimated).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_estimate(&mut buf, &e).unwrap();
        prop_assert!(read_estimate(&buf[..]).unwrap().matches(&e));
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    for text in [
        "",
        "# shape 3 2 2\n",
        "# shape 3 2 2 2 0.5 1\n0 0 5 0.1\n",
        "# shape 3 2 2 2 0.5 1\n0 0 0 0.1\n0 0 0 0.2\n",
        "# shape 3 2 2 2 0.5 1\n0 0 0 zero\n",
        "# collapsed 0 1 2 2\n0 0 1 0.5 extra\n",
    ] {
        assert!(read_observations(text.as_bytes()).is_err() || text.starts_with("# collapsed"), "{text:?}");
    }
    assert!(read_collapsed("# collapsed 0 1 2 2\n0 0 1 0.5 extra\n".as_bytes()).is_err());
    assert!(read_distances("# distances 0 2\n0 1 0.5 2\n".as_bytes()).is_err());
}
