use proptest::prelude::*;

use wtx_core::analysis::{classical_mds, cut_dendrogram, single_linkage};
use wtx_core::datasets::{gen_dumbbell, DumbbellSpec};
use wtx_core::localization::{Kernel, LocalizationConfig};
use wtx_core::metric::from_point_cloud;
use wtx_core::ot::{wasserstein_exact, wasserstein_in_metric, GroundCost, LocalizedMeasure, SolverConfig};
use wtx_core::transform::{transform_iterate, transform_iterate_cloud, EpsilonMode, TransformConfig};
use wtx_core::{FiniteMetricMeasureSpace, PointCloud};

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = PointCloud> {
    (2usize..max_n, 1usize..4).prop_flat_map(|(n, dim)| {
        prop::collection::vec(-2.0f64..2.0, n * dim).prop_map(move |c| PointCloud::new(dim, c, None).unwrap())
    })
}

fn weighted(cloud: &PointCloud, raw: &[f64]) -> FiniteMetricMeasureSpace {
    let w: Vec<f64> = raw[..cloud.len()].to_vec();
    let t: f64 = w.iter().sum();
    from_point_cloud(&cloud.clone().with_weights(w.iter().map(|x| x / t).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transformed_metrics_stay_pseudometrics(
        cloud in cloud_strategy(14),
        raw in prop::collection::vec(0.05f64..1.0, 14),
        eps in 0.05f64..2.0,
        kernel in prop::sample::select(vec![Kernel::Truncation, Kernel::Gaussian, Kernel::Epanechnikov]),
    ) {
        let space = weighted(&cloud, &raw);
        let loc = match kernel {
            Kernel::Truncation => LocalizationConfig::truncation(eps),
            k => LocalizationConfig::kernel(k, eps),
        };
        let cfg = TransformConfig { iterations: 2, ..TransformConfig::new(loc) };
        let (out, trace) = transform_iterate(&space, &cfg).unwrap();
        prop_assert!(out.validate().is_valid(), "{:?}", out.validate());
        prop_assert_eq!(out.weights(), space.weights());
        prop_assert_eq!(trace.len(), 2);
        // A transform never stretches distances beyond the input diameter.
        prop_assert!(out.diameter() <= space.diameter() + 1e-9);
    }

    #[test]
    fn reduced_problem_agrees_with_full_transport(
        cloud in cloud_strategy(16),
        raw in prop::collection::vec(0.05f64..1.0, 32),
        mask in prop::collection::vec(any::<(bool, bool)>(), 16),
    ) {
        let n = cloud.len();
        let d = cloud.distance_matrix();
        let pick = |first: bool, offset: usize| {
            let support: Vec<usize> = (0..n).filter(|&i| if first { mask[i].0 } else { mask[i].1 }).collect();
            let support = if support.is_empty() { vec![0] } else { support };
            let w = support.iter().map(|&i| raw[i + offset]).collect();
            LocalizedMeasure::from_weights(support, w).unwrap()
        };
        let (mu, nu) = (pick(true, 0), pick(false, 16));
        let full = wasserstein_exact(&mu, &nu, &GroundCost::restrict(&d, &mu, &nu)).unwrap().cost;
        let reduced = wasserstein_in_metric(&d, &mu, &nu).unwrap();
        prop_assert!((full - reduced).abs() <= 1e-12 * full.max(1.0), "{} vs {}", full, reduced);
    }

    #[test]
    fn thread_count_is_invisible(cloud in cloud_strategy(20), eps in 0.1f64..0.8) {
        let mut cfg = TransformConfig::new(LocalizationConfig::truncation(eps));
        cfg.iterations = 2;
        cfg.epsilon_mode = EpsilonMode::Relative;
        let one = transform_iterate_cloud(&cloud, &cfg).unwrap();
        cfg.threads = 3;
        let three = transform_iterate_cloud(&cloud, &cfg).unwrap();
        prop_assert_eq!(one.0, three.0);
    }
}

#[test]
fn sinkhorn_transform_tracks_exact() {
    let cloud = PointCloud::new(2, (0..40).map(|k| (k * 37 % 101) as f64 / 101.0).collect(), None).unwrap();
    let mut cfg = TransformConfig::new(LocalizationConfig::truncation(0.4));
    let exact = transform_iterate_cloud(&cloud, &cfg).unwrap().0;
    cfg.solver = SolverConfig::sinkhorn();
    let approx = transform_iterate_cloud(&cloud, &cfg).unwrap().0;
    let worst = exact
        .dist()
        .as_slice()
        .iter()
        .zip(approx.dist().as_slice())
        .map(|(a, b)| (a - b).abs() / a.max(1e-9))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn small_dumbbell_end_to_end() {
    // A smaller dumbbell keeps this fast; the full-size run lives in the
    // acceptance suite.
    let spec = DumbbellSpec {
        blob_n: 30,
        chain_n: 12,
        ..DumbbellSpec::new(11)
    };
    let cloud = gen_dumbbell(&spec).unwrap();
    let labels = cloud.labels().unwrap().to_vec();
    let mut cfg = TransformConfig::new(LocalizationConfig::truncation(0.3));
    cfg.iterations = 3;
    let (out, trace, _) = transform_iterate_cloud(&cloud, &cfg).unwrap();
    assert!(trace.iterations.windows(2).all(|w| w[1].diameter <= w[0].diameter + 1e-12));
    let cut = cut_dendrogram(&single_linkage(&out).unwrap(), 2).unwrap();
    for c in 0..2 {
        let blobs: Vec<&str> = labels
            .iter()
            .zip(&cut)
            .filter(|(l, &k)| k == c && l.starts_with("blob"))
            .map(|(l, _)| l.as_str())
            .collect();
        assert!(blobs.windows(2).all(|w| w[0] == w[1]), "cluster {c} mixes blobs");
    }
    let emb = classical_mds(&out, 2).unwrap();
    assert_eq!(emb.coords.len(), 2 * cloud.len());
}
