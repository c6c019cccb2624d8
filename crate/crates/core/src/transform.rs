//! The Wasserstein transform: pairwise `d_{W,1}` between localized measures
//! becomes the new distance matrix.

use std::str::FromStr;
use std::time::Instant;

use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::localization::{localize, LocalizationConfig, LocalizationKind};
use crate::meanshift::shift_points;
use crate::metric::{from_point_cloud, DistanceMatrix, FiniteMetricMeasureSpace, PointCloud};
use crate::ot::{
    wasserstein_1d, wasserstein_1d_atoms, wasserstein_in_metric, wasserstein_sinkhorn, GroundCost,
    LocalizedMeasure, SolverConfig, SolverMethod,
};
use crate::parallel::{condensed_pair, fill_indexed, pool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    #[default]
    Absolute,
    /// `ε = epsilon × current diameter`, recomputed every iteration.
    Relative,
}

impl FromStr for EpsilonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(EpsilonMode::Absolute),
            "relative" => Ok(EpsilonMode::Relative),
            _ => Err(invalid("epsilon_mode", format!("unknown mode `{s}`"))),
        }
    }
}

impl EpsilonMode {
    pub(crate) fn resolve(self, epsilon: f64, diameter: f64) -> f64 {
        match self {
            EpsilonMode::Absolute => epsilon,
            EpsilonMode::Relative => epsilon * diameter,
        }
    }

    pub(crate) fn check(self, epsilon: f64) -> Result<()> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if self == EpsilonMode::Relative && epsilon > 1.0 {
            return Err(invalid("epsilon", format!("relative epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// `localization.epsilon` is read according to `epsilon_mode`.
    pub localization: LocalizationConfig,
    pub solver: SolverConfig,
    pub iterations: usize,
    pub epsilon_mode: EpsilonMode,
    pub threads: usize,
}

impl TransformConfig {
    pub fn new(localization: LocalizationConfig) -> Self {
        TransformConfig {
            localization,
            solver: SolverConfig::exact(),
            iterations: 1,
            epsilon_mode: EpsilonMode::Absolute,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.epsilon_mode.check(self.localization.epsilon)?;
        self.solver.validate()?;
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        Ok(())
    }
}

/// One transform iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Diameter of the output metric.
    pub diameter: f64,
    pub epsilon_used: f64,
    pub solve_count: usize,
    pub wall_ms: f64,
    #[serde(skip)]
    pub dist: Option<DistanceMatrix>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformTrace {
    pub iterations: Vec<IterationRecord>,
}

impl TransformTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// One application of the transform with ε taken as absolute.
pub fn transform_once(
    space: &FiniteMetricMeasureSpace,
    config: &TransformConfig,
) -> Result<FiniteMetricMeasureSpace> {
    let cfg = TransformConfig {
        iterations: 1,
        epsilon_mode: EpsilonMode::Absolute,
        ..config.clone()
    };
    transform_iterate(space, &cfg).map(|(s, _)| s)
}

/// `config.iterations` applications, each on the previous output metric
/// with the same weights.
pub fn transform_iterate(
    space: &FiniteMetricMeasureSpace,
    config: &TransformConfig,
) -> Result<(FiniteMetricMeasureSpace, TransformTrace)> {
    if config.localization.kind == LocalizationKind::MeanshiftWrap {
        return Err(Error::Unsupported(
            "mean-shift localization needs Euclidean coordinates; pass a point cloud".into(),
        ));
    }
    config.validate()?;
    let workers = pool(config.threads)?;
    run_metric(space.clone(), None, config, &workers)
}

/// Transform of a Euclidean cloud. Returns the final metric, the trace and
/// the cloud carried along: shifted means for the mean-shift localization,
/// the input otherwise. A 1D cloud supplies coordinates for the `one_dim`
/// solver on the first iteration.
pub fn transform_iterate_cloud(
    cloud: &PointCloud,
    config: &TransformConfig,
) -> Result<(FiniteMetricMeasureSpace, TransformTrace, PointCloud)> {
    config.validate()?;
    let workers = pool(config.threads)?;
    if config.localization.kind != LocalizationKind::MeanshiftWrap {
        let coords = (cloud.dim() == 1).then(|| cloud.coords().to_vec());
        let (s, t) = run_metric(from_point_cloud(cloud), coords, config, &workers)?;
        return Ok((s, t, cloud.clone()));
    }

    let mut current = cloud.clone();
    let mut trace = TransformTrace::default();
    let n = cloud.len();
    for it in 1..=config.iterations {
        let start = Instant::now();
        let eps = config
            .epsilon_mode
            .resolve(config.localization.epsilon, current.diameter());
        if eps > 0.0 {
            let loc = config.localization.with_epsilon(eps);
            current = shift_points(&current, loc.inner, loc.kernel, eps, &workers)?;
        }
        let dist = current.distance_matrix();
        trace.iterations.push(IterationRecord {
            iteration: it,
            diameter: dist.max_entry(),
            epsilon_used: eps,
            solve_count: n * n.saturating_sub(1) / 2,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            dist: Some(dist),
        });
    }
    Ok((from_point_cloud(&current), trace, current))
}

fn run_metric(
    mut space: FiniteMetricMeasureSpace,
    coords: Option<Vec<f64>>,
    config: &TransformConfig,
    workers: &ThreadPool,
) -> Result<(FiniteMetricMeasureSpace, TransformTrace)> {
    let mut trace = TransformTrace::default();
    let mut coords = coords;
    for it in 1..=config.iterations {
        let start = Instant::now();
        let diameter = space.diameter();
        let eps = config.epsilon_mode.resolve(config.localization.epsilon, diameter);
        let (dist, solves) = if eps > 0.0 {
            let loc = config.localization.with_epsilon(eps);
            one_pass(&space, &loc, &config.solver, coords.as_deref(), workers)
                .map_err(|e| with_iteration(e, it))?
        } else {
            // Diameter 0: every localization is α itself.
            (DistanceMatrix::zeros(space.len()), 0)
        };
        space = space.with_dist(dist.clone())?;
        coords = None;
        trace.iterations.push(IterationRecord {
            iteration: it,
            diameter: dist.max_entry(),
            epsilon_used: eps,
            solve_count: solves,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            dist: Some(dist),
        });
    }
    Ok((space, trace))
}

fn with_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::PairFailed { i, j, source, .. } => Error::PairFailed {
            iteration,
            i,
            j,
            source,
        },
        other => other,
    }
}

fn one_pass(
    space: &FiniteMetricMeasureSpace,
    loc: &LocalizationConfig,
    solver: &SolverConfig,
    coords: Option<&[f64]>,
    workers: &ThreadPool,
) -> Result<(DistanceMatrix, usize)> {
    let n = space.len();
    if solver.method == SolverMethod::OneDim && coords.is_none() {
        return Err(invalid(
            "solver",
            "one_dim needs 1D coordinates, available only on the first iteration of a 1D cloud",
        ));
    }
    let mut measures = vec![LocalizedMeasure::dirac(0); n];
    fill_indexed(workers, &mut measures, |x| localize(space, x, loc))?;

    let pairs = n * n.saturating_sub(1) / 2;
    let mut upper = vec![0.0; pairs];
    fill_indexed(workers, &mut upper, |k| {
        let (i, j) = condensed_pair(n, k);
        pair_distance(space.dist(), &measures[i], &measures[j], solver, coords).map_err(|e| {
            Error::PairFailed {
                iteration: 0,
                i,
                j,
                source: Box::new(e),
            }
        })
    })?;
    Ok((DistanceMatrix::from_condensed(n, &upper)?, pairs))
}

fn pair_distance(
    dist: &DistanceMatrix,
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    solver: &SolverConfig,
    coords: Option<&[f64]>,
) -> Result<f64> {
    if mu == nu {
        return Ok(0.0);
    }
    match solver.method {
        SolverMethod::Exact => wasserstein_in_metric(dist, mu, nu),
        SolverMethod::Sinkhorn => {
            let ground = GroundCost::restrict(dist, mu, nu);
            wasserstein_sinkhorn(mu, nu, &ground, solver).map(|p| p.cost)
        }
        SolverMethod::OneDim => wasserstein_1d(mu, nu, coords.unwrap_or_default()),
    }
}

/// Result of [`taylor_residual_1d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorResidual {
    pub d_eps: f64,
    pub first_order: f64,
    pub residual: f64,
}

/// Compares `d^(ε)(x, x')` for a density on `domain` against its
/// second-order expansion in ε.
///
/// The density is discretized to `grid_n` equal cells (atoms at cell
/// midpoints, mass `f · h`), both points are truncation-localized with
/// closed balls, and the distance comes from the exact 1D solver.
/// Derivatives in the expansion use central differences.
pub fn taylor_residual_1d(
    density: &dyn Fn(f64) -> f64,
    domain: (f64, f64),
    x: f64,
    x_prime: f64,
    epsilon: f64,
    grid_n: usize,
) -> Result<TaylorResidual> {
    let (lo, hi) = domain;
    if !(hi > lo) {
        return Err(invalid("domain", "upper end must exceed lower end"));
    }
    if !(x_prime > x) {
        return Err(invalid("x_prime", "must exceed x"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    if grid_n < 2 {
        return Err(invalid("grid_n", "need at least two cells"));
    }
    let (fx, fy) = (density(x), density(x_prime));
    if !(fx >= 1e-12) || !(fy >= 1e-12) {
        return Err(invalid("density", "must be at least 1e-12 at both points"));
    }

    let h = (hi - lo) / grid_n as f64;
    let atoms: Vec<(f64, f64)> = (0..grid_n)
        .map(|k| {
            let t = lo + (k as f64 + 0.5) * h;
            (t, density(t) * h)
        })
        .collect();
    let window = |c: f64| -> (Vec<f64>, Vec<f64>) {
        let (xs, ws): (Vec<f64>, Vec<f64>) = atoms
            .iter()
            .filter(|(t, w)| (t - c).abs() <= epsilon && *w > 0.0)
            .copied()
            .unzip();
        let total: f64 = ws.iter().sum();
        (xs, ws.iter().map(|w| w / total).collect())
    };
    let (xs, ws) = window(x);
    let (ys, vs) = window(x_prime);
    if ws.is_empty() || vs.is_empty() {
        return Err(invalid("grid_n", "grid too coarse for the window"));
    }
    let d_eps = wasserstein_1d_atoms(&xs, &ws, &ys, &vs)?;

    let step = 1e-4 * (hi - lo);
    let log_slope = |c: f64, fc: f64| (density(c + step) - density(c - step)) / (2.0 * step) / fc;
    let first_order =
        (x_prime - x) + (log_slope(x_prime, fy) - log_slope(x, fx)) * epsilon * epsilon / 3.0;
    Ok(TaylorResidual {
        d_eps,
        first_order,
        residual: (d_eps - first_order).abs(),
    })
}
