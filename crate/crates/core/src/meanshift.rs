//! Mean shift: every point moves to the kernel-weighted mean of its
//! neighbourhood, all from the same snapshot.

use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::localization::{inner_mean, localize_truncation, InnerKind, Kernel};
use crate::metric::{euclidean, from_point_cloud, PointCloud};
use crate::ot::wasserstein_in_metric;
use crate::parallel::{fill_indexed, pool};
use crate::transform::EpsilonMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub epsilon_mode: EpsilonMode,
    pub iterations: usize,
    pub threads: usize,
}

impl MeanShiftConfig {
    pub fn new(kernel: Kernel, epsilon: f64) -> Self {
        MeanShiftConfig {
            kernel,
            epsilon,
            epsilon_mode: EpsilonMode::Absolute,
            iterations: 1,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.epsilon_mode.check(self.epsilon)?;
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftRecord {
    /// 1-based.
    pub iteration: usize,
    pub epsilon_used: f64,
    /// Largest distance any point moved in this step.
    pub max_displacement: f64,
    /// Diameter after the step.
    pub diameter: f64,
    #[serde(skip)]
    pub cloud: Option<PointCloud>,
}

/// Means of the inner localization at every point.
pub(crate) fn shift_points(
    cloud: &PointCloud,
    inner: InnerKind,
    kernel: Kernel,
    epsilon: f64,
    workers: &ThreadPool,
) -> Result<PointCloud> {
    let mut means = vec![Vec::new(); cloud.len()];
    fill_indexed(workers, &mut means, |i| Ok(inner_mean(cloud, i, inner, kernel, epsilon)))?;
    cloud.with_coords(means.concat())
}

/// One simultaneous update with ε resolved against the current diameter.
pub fn meanshift_step(cloud: &PointCloud, config: &MeanShiftConfig) -> Result<PointCloud> {
    config.validate()?;
    let workers = pool(config.threads)?;
    step_in(cloud, config, &workers).map(|(c, _)| c)
}

fn step_in(cloud: &PointCloud, config: &MeanShiftConfig, workers: &ThreadPool) -> Result<(PointCloud, f64)> {
    let eps = config.epsilon_mode.resolve(config.epsilon, cloud.diameter());
    if eps <= 0.0 {
        return Ok((cloud.clone(), eps));
    }
    Ok((shift_points(cloud, InnerKind::Kernel, config.kernel, eps, workers)?, eps))
}

/// `config.iterations` steps with a per-step record.
pub fn meanshift_run(
    cloud: &PointCloud,
    config: &MeanShiftConfig,
) -> Result<(PointCloud, Vec<MeanShiftRecord>)> {
    config.validate()?;
    let workers = pool(config.threads)?;
    let mut current = cloud.clone();
    let mut trace = Vec::with_capacity(config.iterations);
    for it in 1..=config.iterations {
        let (next, eps) = step_in(&current, config, &workers)?;
        let max_displacement = current
            .points()
            .zip(next.points())
            .map(|(a, b)| euclidean(a, b))
            .fold(0.0, f64::max);
        current = next;
        trace.push(MeanShiftRecord {
            iteration: it,
            epsilon_used: eps,
            max_displacement,
            diameter: current.diameter(),
            cloud: Some(current.clone()),
        });
    }
    Ok((current, trace))
}

/// One unordered pair in [`meanshift_transform_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    /// Distance between the truncation means.
    pub ms_dist: f64,
    /// `d_{W,1}` between the truncations.
    pub wt_dist: f64,
}

/// Mean-shift distance against transform distance for every pair, both
/// from truncation localization at scale `epsilon`.
pub fn meanshift_transform_gap(cloud: &PointCloud, epsilon: f64) -> Result<Vec<PairGap>> {
    let space = from_point_cloud(cloud);
    let measures = (0..cloud.len())
        .map(|x| localize_truncation(&space, x, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<Vec<f64>> = measures.iter().map(|m| m.mean(cloud)).collect();
    let n = cloud.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(PairGap {
                i,
                j,
                ms_dist: euclidean(&means[i], &means[j]),
                wt_dist: wasserstein_in_metric(space.dist(), &measures[i], &measures[j])?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_is_fixed() {
        let c = PointCloud::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let out = meanshift_step(&c, &MeanShiftConfig::new(Kernel::Gaussian, 0.5)).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn line_truncation_step() {
        let c = PointCloud::from_line(&[0.0, 1.0, 2.0]).unwrap();
        let out = meanshift_step(&c, &MeanShiftConfig::new(Kernel::Truncation, 1.0)).unwrap();
        assert_eq!(out.coords(), &[0.5, 1.0, 1.5]);
    }

    #[test]
    fn wide_truncation_collapses_to_centroid() {
        let c = PointCloud::new(2, vec![0.0, 0.0, 3.0, 1.0, -1.0, 2.0], Some(vec![0.5, 0.25, 0.25])).unwrap();
        let out = meanshift_step(&c, &MeanShiftConfig::new(Kernel::Truncation, 10.0)).unwrap();
        for p in out.points() {
            assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn separated_blobs_contract_to_own_centroids() {
        let c = PointCloud::from_line(&[0.0, 0.1, 0.3, 10.0, 10.2]).unwrap();
        let mut cfg = MeanShiftConfig::new(Kernel::Truncation, 1.0);
        cfg.iterations = 3;
        let (out, trace) = meanshift_run(&c, &cfg).unwrap();
        for p in &out.coords()[..3] {
            assert!((p - 0.4 / 3.0).abs() < 1e-12);
        }
        for p in &out.coords()[3..] {
            assert!((p - 10.1).abs() < 1e-12);
        }
        assert!(trace[2].max_displacement < 1e-12);
    }

    #[test]
    fn zero_iterations() {
        let c = PointCloud::from_line(&[0.0, 1.0]).unwrap();
        let mut cfg = MeanShiftConfig::new(Kernel::Epanechnikov, 1.0);
        cfg.iterations = 0;
        let (out, trace) = meanshift_run(&c, &cfg).unwrap();
        assert_eq!(out, c);
        assert!(trace.is_empty());
    }

    #[test]
    fn gap_at_small_scale_is_input_distance() {
        let c = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        for g in meanshift_transform_gap(&c, 0.5).unwrap() {
            let d = c.distance(g.i, g.j);
            assert_eq!(g.ms_dist, d);
            assert_eq!(g.wt_dist, d);
        }
    }

    fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
        (1usize..15, 1usize..4).prop_flat_map(|(n, dim)| {
            prop::collection::vec(-3.0f64..3.0, n * dim)
                .prop_map(move |c| PointCloud::new(dim, c, None).unwrap())
        })
    }

    proptest! {
        #[test]
        fn commutes_with_rigid_motions(
            c in cloud_strategy(), theta in 0.0f64..6.3, tx in -5.0f64..5.0, ty in -5.0f64..5.0,
            eps in 0.2f64..4.0, k in 0usize..3
        ) {
            prop_assume!(c.dim() == 2);
            let kernel = [Kernel::Truncation, Kernel::Gaussian, Kernel::Epanechnikov][k];
            let cfg = MeanShiftConfig::new(kernel, eps);
            let (s, co) = theta.sin_cos();
            let motion = |p: &PointCloud| {
                let coords = p.points().flat_map(|q| [co * q[0] - s * q[1] + tx, s * q[0] + co * q[1] + ty]).collect();
                p.with_coords(coords).unwrap()
            };
            // Truncation can flip at exact ball boundaries under rounding.
            let boundary = (0..c.len()).any(|i| (0..c.len()).any(|j| (c.distance(i, j) / eps - 1.0).abs() < 1e-9));
            prop_assume!(!boundary);
            let a = motion(&meanshift_step(&c, &cfg).unwrap());
            let b = meanshift_step(&motion(&c), &cfg).unwrap();
            for (x, y) in a.coords().iter().zip(b.coords()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn hull_never_grows(c in cloud_strategy(), eps in 0.1f64..5.0) {
            let out = meanshift_step(&c, &MeanShiftConfig::new(Kernel::Truncation, eps)).unwrap();
            for d in 0..c.dim() {
                let lo = c.points().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                let hi = c.points().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.points().all(|p| p[d] >= lo - 1e-12 && p[d] <= hi + 1e-12));
            }
        }

        #[test]
        fn lower_bound_holds(c in cloud_strategy(), eps in 0.1f64..5.0) {
            for g in meanshift_transform_gap(&c, eps).unwrap() {
                prop_assert!(g.ms_dist <= g.wt_dist + 1e-9, "{:?}", g);
            }
        }
    }
}
