//! ℓ¹-Wasserstein distances between finitely supported measures.
//!
//! Three routes are provided:
//!
//! | route | function | use |
//! |-------|----------|-----|
//! | exact LP | [`wasserstein_exact`] | network simplex on the transport polytope |
//! | entropic | [`wasserstein_sinkhorn`] | scaled Sinkhorn iterations with rounding |
//! | 1D | [`wasserstein_1d`] | `∫ |F − G|` over sorted breakpoints |
//!
//! All of them take the measures as [`LocalizedMeasure`]s whose supports index
//! into an ambient space; the caller supplies the ground cost restricted to
//! the two supports.

mod network_simplex;
mod one_dim;
mod sinkhorn;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::{euclidean, DistanceMatrix, PointCloud};

pub(crate) use network_simplex::solve_transport;
pub use one_dim::{wasserstein_1d, wasserstein_1d_atoms};
pub use sinkhorn::{sinkhorn_with_report, wasserstein_sinkhorn, SinkhornOutcome};

/// Tolerance on `Σ mass = 1` for localized measures.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest allowed gap between the total masses of the two marginals.
pub const IMBALANCE_TOLERANCE: f64 = 1e-9;

/// A probability measure supported on a subset of ambient point indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedMeasure {
    support: Vec<usize>,
    mass: Vec<f64>,
}

impl LocalizedMeasure {
    /// Checks positivity, normalization and strictly increasing support.
    pub fn new(support: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::Shape(format!(
                "{} support points but {} masses",
                support.len(),
                mass.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "support must be strictly increasing".into(),
            ));
        }
        if let Some(k) = mass.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "mass at support point {} is {}",
                support[k], mass[k]
            )));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}")));
        }
        Ok(LocalizedMeasure { support, mass })
    }

    /// Normalizes nonnegative weights over `support`, dropping zeros.
    pub fn from_weights(support: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!("total weight is {total}")));
        }
        let (s, m): (Vec<usize>, Vec<f64>) = support
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .map(|(i, w)| (i, w / total))
            .unzip();
        Self::new(s, m)
    }

    pub fn dirac(point: usize) -> Self {
        LocalizedMeasure {
            support: vec![point],
            mass: vec![1.0],
        }
    }

    /// A full-support measure over `0..weights.len()`.
    pub fn full(weights: &[f64]) -> Result<Self> {
        Self::new((0..weights.len()).collect(), weights.to_vec())
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Mass at ambient index `i` (0 off the support).
    pub fn mass_at(&self, i: usize) -> f64 {
        self.support
            .binary_search(&i)
            .map_or(0.0, |k| self.mass[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.mass.iter().copied())
    }

    /// Weighted mean of the support points in a Euclidean cloud.
    pub fn mean(&self, cloud: &PointCloud) -> Vec<f64> {
        let mut out = vec![0.0; cloud.dim()];
        for (i, m) in self.iter() {
            for (o, x) in out.iter_mut().zip(cloud.point(i)) {
                *o += m * x;
            }
        }
        out
    }
}

/// Dense cost block `ground[r][c]` between two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundCost {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GroundCost {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "cost block {rows}×{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::NonFinite {
                context: format!("ground cost entry ({}, {})", k / cols.max(1), k % cols.max(1)),
            });
        }
        Ok(GroundCost { rows, cols, data })
    }

    /// The rectangular chunk of `dist` between the supports of `mu` and `nu`.
    pub fn restrict(dist: &DistanceMatrix, mu: &LocalizedMeasure, nu: &LocalizedMeasure) -> Self {
        GroundCost {
            rows: mu.len(),
            cols: nu.len(),
            data: dist.submatrix(mu.support(), nu.support()),
        }
    }

    /// Euclidean costs between the supports inside a cloud.
    pub fn euclidean(cloud: &PointCloud, mu: &LocalizedMeasure, nu: &LocalizedMeasure) -> Self {
        let mut data = Vec::with_capacity(mu.len() * nu.len());
        for &i in mu.support() {
            for &j in nu.support() {
                data.push(euclidean(cloud.point(i), cloud.point(j)));
            }
        }
        GroundCost {
            rows: mu.len(),
            cols: nu.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// A coupling between two localized measures and its transport cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` nonnegative matrix.
    pub plan: Vec<f64>,
    /// `Σ plan[r][c] · ground[r][c]`.
    pub cost: f64,
}

impl TransportPlan {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.plan[r * self.cols + c]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan
            .chunks(self.cols.max(1))
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.plan.chunks(self.cols.max(1)) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Largest absolute deviation from the two marginals.
    pub fn marginal_error(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .zip(nu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }

    /// Recomputes `⟨plan, ground⟩`.
    pub fn evaluate(&self, ground: &GroundCost) -> f64 {
        self.plan
            .iter()
            .zip(ground.as_slice())
            .map(|(p, c)| p * c)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Exact,
    Sinkhorn,
    OneDim,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverMethod::Exact),
            "sinkhorn" => Ok(SolverMethod::Sinkhorn),
            "one_dim" | "one-dim" | "1d" => Ok(SolverMethod::OneDim),
            other => Err(invalid("solver", format!("unknown solver `{other}`"))),
        }
    }
}

/// Relative regularization at the start of the default Sinkhorn schedule.
pub const DEFAULT_SINKHORN_START: f64 = 0.1;
/// Relative regularization at the end of the default Sinkhorn schedule.
pub const DEFAULT_SINKHORN_REG: f64 = 0.0001;

/// Solver choice and Sinkhorn parameters.
///
/// The Sinkhorn schedule decreases the regularization geometrically by a
/// factor of ten, from `sinkhorn_start × max cost` down to the final value,
/// warm-starting each stage from the previous potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Final regularization in distance units; `None` means
    /// `DEFAULT_SINKHORN_REG × max ground entry`.
    pub sinkhorn_reg: Option<f64>,
    /// First regularization of the schedule, relative to the max ground entry.
    pub sinkhorn_start: f64,
    pub sinkhorn_max_iter: usize,
    /// Stop once the L1 row-marginal residual falls below this value.
    pub sinkhorn_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Exact,
            sinkhorn_reg: None,
            sinkhorn_start: DEFAULT_SINKHORN_START,
            sinkhorn_max_iter: 100_000,
            sinkhorn_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sinkhorn() -> Self {
        SolverConfig {
            method: SolverMethod::Sinkhorn,
            ..Self::default()
        }
    }

    pub fn one_dim() -> Self {
        SolverConfig {
            method: SolverMethod::OneDim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.sinkhorn_reg {
            if !(r > 0.0) || !r.is_finite() {
                return Err(invalid("sinkhorn_reg", format!("must be positive, got {r}")));
            }
        }
        if !(self.sinkhorn_start > 0.0) || !self.sinkhorn_start.is_finite() {
            return Err(invalid(
                "sinkhorn_start",
                format!("must be positive, got {}", self.sinkhorn_start),
            ));
        }
        if self.sinkhorn_max_iter == 0 {
            return Err(invalid("sinkhorn_max_iter", "must be at least 1"));
        }
        if !(self.sinkhorn_tol > 0.0) {
            return Err(invalid(
                "sinkhorn_tol",
                format!("must be positive, got {}", self.sinkhorn_tol),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_balance(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > IMBALANCE_TOLERANCE {
        return Err(Error::MassImbalance {
            source_mass: a,
            target_mass: b,
        });
    }
    Ok(())
}

fn check_ground(mu: &LocalizedMeasure, nu: &LocalizedMeasure, ground: &GroundCost) -> Result<()> {
    if ground.rows() != mu.len() || ground.cols() != nu.len() {
        return Err(Error::Shape(format!(
            "ground block is {}×{}, supports are {}×{}",
            ground.rows(),
            ground.cols(),
            mu.len(),
            nu.len()
        )));
    }
    Ok(())
}

/// Exact `d_{W,1}(mu, nu)` with an optimal coupling, by network simplex.
///
/// Pivoting is deterministic, so repeated calls return bitwise identical
/// plans.
pub fn wasserstein_exact(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    ground: &GroundCost,
) -> Result<TransportPlan> {
    check_ground(mu, nu, ground)?;
    let solution = solve_transport(mu.mass(), nu.mass(), ground.as_slice())?;
    let mut plan = vec![0.0; mu.len() * nu.len()];
    for &(r, c, f) in &solution.flows {
        plan[r * nu.len() + c] += f;
    }
    Ok(TransportPlan {
        rows: mu.len(),
        cols: nu.len(),
        plan,
        cost: solution.cost,
    })
}

/// Dispatches on `config.method`. `coords` is the 1D embedding of the
/// ambient space, required by [`SolverMethod::OneDim`].
pub fn wasserstein(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    ground: &GroundCost,
    config: &SolverConfig,
    coords: Option<&[f64]>,
) -> Result<f64> {
    match config.method {
        SolverMethod::Exact => wasserstein_exact(mu, nu, ground).map(|p| p.cost),
        SolverMethod::Sinkhorn => wasserstein_sinkhorn(mu, nu, ground, config).map(|p| p.cost),
        SolverMethod::OneDim => {
            let coords = coords.ok_or_else(|| {
                invalid("solver", "one_dim requires a 1D coordinate embedding")
            })?;
            wasserstein_1d(mu, nu, coords)
        }
    }
}

/// Exact `d_{W,1}(mu, nu)` when `dist` is a (pseudo)metric.
///
/// For metric costs only the signed difference `mu − nu` matters, so the
/// shared mass stays in place and the positive part is transported onto the
/// negative part. This solves a smaller problem with the same optimum.
pub fn wasserstein_in_metric(
    dist: &DistanceMatrix,
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
) -> Result<f64> {
    if mu == nu {
        return Ok(0.0);
    }
    let (a, b) = (mu.support(), nu.support());
    let (mut i, mut j) = (0, 0);
    let (mut src, mut supply, mut dst, mut demand) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut push = |k: usize, d: f64| {
        if d > 0.0 {
            src.push(k);
            supply.push(d);
        } else if d < 0.0 {
            dst.push(k);
            demand.push(-d);
        }
    };
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            push(a[i], mu.mass()[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            push(b[j], -nu.mass()[j]);
            j += 1;
        } else {
            push(a[i], mu.mass()[i] - nu.mass()[j]);
            i += 1;
            j += 1;
        }
    }
    if src.is_empty() || dst.is_empty() {
        return Ok(0.0);
    }
    let cost = dist.submatrix(&src, &dst);
    if let Some(c) = cost.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(Error::NonFinite {
            context: format!("ground distance {c}"),
        });
    }
    Ok(solve_transport(&supply, &demand, &cost)?.cost)
}

/// `(‖mean(mu) − mean(nu)‖, d_{W,1}(mu, nu))` in a Euclidean cloud; the first
/// never exceeds the second.
pub fn mean_lower_bound_check(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    cloud: &PointCloud,
) -> Result<(f64, f64)> {
    let gap = euclidean(&mu.mean(cloud), &nu.mean(cloud));
    let ground = GroundCost::euclidean(cloud, mu, nu);
    let w1 = wasserstein_exact(mu, nu, &ground)?.cost;
    Ok((gap, w1))
}
