//! Doubling certificates, the `ψ`/`Φ` bound functions, Prokhorov distances,
//! and numerical checks of the stability inequalities for local truncations.

mod doubling;
mod monte_carlo;
mod prokhorov;

pub use doubling::{certify_doubling, certify_doubling_with, diameter_bound, phi, psi, DoublingCertificate, DIAMETER_MARGIN};
pub use monte_carlo::{run_monte_carlo, CheckSummary, MonteCarloConfig, MonteCarloReport, TrialOutcome};
pub use prokhorov::{prokhorov_bruteforce, PROKHOROV_SUPPORT_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::localize_truncation;
use crate::metric::{euclidean, from_point_cloud, DistanceMatrix, FiniteMetricMeasureSpace, PointCloud};
use crate::ot::{wasserstein_in_metric, LocalizedMeasure};

/// Slack below which a checked inequality counts as violated.
pub const SLACK_TOLERANCE: f64 = 1e-9;

/// One checked inequality `lhs ≤ rhs` with its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub d: Option<f64>,
    /// `d_{W,1}(α, β)`, or `d_P` for the Prokhorov side of the sandwich.
    pub distance: f64,
}

impl StabilityReport {
    fn new(lhs: f64, rhs: f64, distance: f64) -> Self {
        StabilityReport {
            lhs,
            rhs,
            slack: rhs - lhs,
            epsilon: None,
            lambda: None,
            d: None,
            distance,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// Both sides of `d_P² ≤ d_{W,1} ≤ (1 + diam)·d_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsSuReport {
    pub prokhorov: f64,
    pub wasserstein: f64,
    pub diameter: f64,
    pub lower: StabilityReport,
    pub upper: StabilityReport,
}

/// Checks the Wasserstein–Prokhorov sandwich. `diam` bounds the diameter;
/// it is tightened to the diameter of the combined support when smaller.
pub fn check_gibbs_su(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    ground: &DistanceMatrix,
    diam: f64,
) -> Result<GibbsSuReport> {
    let dp = prokhorov_bruteforce(mu, nu, ground)?;
    let w = wasserstein_in_metric(ground, mu, nu)?;
    let mut support: Vec<usize> = mu.support().iter().chain(nu.support()).copied().collect();
    support.sort_unstable();
    support.dedup();
    let local = support
        .iter()
        .flat_map(|&i| support.iter().map(move |&j| ground.get(i, j)))
        .fold(0.0, f64::max);
    let diameter = local.min(diam);
    Ok(GibbsSuReport {
        prokhorov: dp,
        wasserstein: w,
        diameter,
        lower: StabilityReport::new(dp * dp, w, dp),
        upper: StabilityReport::new(w, (1.0 + diameter) * dp, dp),
    })
}

struct Bound {
    lambda: f64,
    d: f64,
    w: f64,
    factor: f64,
}

fn bound_inputs(alpha: &FiniteMetricMeasureSpace, beta: &FiniteMetricMeasureSpace, epsilon: f64) -> Result<Bound> {
    let d = diameter_bound(alpha);
    let lambda = certify_doubling_with(alpha, d)
        .lambda
        .max(certify_doubling_with(beta, d).lambda);
    let full_a = LocalizedMeasure::full(alpha.weights())?;
    let full_b = LocalizedMeasure::full(beta.weights())?;
    let w = wasserstein_in_metric(alpha.dist(), &full_a, &full_b)?;
    let factor = (1.0 + 2.0 * epsilon) * phi(lambda, d, epsilon, w.sqrt())?;
    Ok(Bound { lambda, d, w, factor })
}

fn finish(lhs: f64, rhs: f64, epsilon: f64, b: &Bound) -> StabilityReport {
    StabilityReport {
        epsilon: Some(epsilon),
        lambda: Some(b.lambda),
        d: Some(b.d),
        ..StabilityReport::new(lhs, rhs, b.w)
    }
}

fn beta_space(alpha: &FiniteMetricMeasureSpace, beta_weights: &[f64]) -> Result<FiniteMetricMeasureSpace> {
    if beta_weights.len() != alpha.len() {
        return Err(Error::Shape(format!(
            "{} beta weights for {} points",
            beta_weights.len(),
            alpha.len()
        )));
    }
    alpha.with_weights(beta_weights.to_vec())
}

fn truncations(space: &FiniteMetricMeasureSpace, epsilon: f64) -> Result<Vec<LocalizedMeasure>> {
    (0..space.len())
        .map(|x| localize_truncation(space, x, epsilon))
        .collect()
}

/// `sup_x d_{W,1}(m_α^(ε)(x), m_β^(ε)(x)) ≤ (1+2ε)·Φ(√d_{W,1}(α, β))`.
pub fn verify_theorem_truncation(
    alpha: &FiniteMetricMeasureSpace,
    beta_weights: &[f64],
    epsilon: f64,
) -> Result<StabilityReport> {
    let beta = beta_space(alpha, beta_weights)?;
    let b = bound_inputs(alpha, &beta, epsilon)?;
    let lhs = truncation_lhs(alpha, &beta, epsilon)?;
    Ok(finish(lhs, b.factor, epsilon, &b))
}

fn truncation_lhs(alpha: &FiniteMetricMeasureSpace, beta: &FiniteMetricMeasureSpace, epsilon: f64) -> Result<f64> {
    let ma = truncations(alpha, epsilon)?;
    let mb = truncations(beta, epsilon)?;
    let mut lhs: f64 = 0.0;
    for (a, b) in ma.iter().zip(&mb) {
        lhs = lhs.max(wasserstein_in_metric(alpha.dist(), a, b)?);
    }
    Ok(lhs)
}

/// `sup_{x,x'} |d_α^(ε)(x,x') − d_β^(ε)(x,x')| ≤ 2(1+2ε)·Φ(√d_{W,1}(α, β))`.
pub fn verify_theorem_metric(
    alpha: &FiniteMetricMeasureSpace,
    beta_weights: &[f64],
    epsilon: f64,
) -> Result<StabilityReport> {
    let beta = beta_space(alpha, beta_weights)?;
    let b = bound_inputs(alpha, &beta, epsilon)?;
    let ma = truncations(alpha, epsilon)?;
    let mb = truncations(&beta, epsilon)?;
    let n = alpha.len();
    let mut lhs: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let da = wasserstein_in_metric(alpha.dist(), &ma[i], &ma[j])?;
            let db = wasserstein_in_metric(alpha.dist(), &mb[i], &mb[j])?;
            lhs = lhs.max((da - db).abs());
        }
    }
    Ok(finish(lhs, 2.0 * b.factor, epsilon, &b))
}

/// Mean-shift check with the truncation quantity it passes through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftStability {
    pub report: StabilityReport,
    /// `sup_x d_{W,1}(m_α^(ε)(x), m_β^(ε)(x))`, which bounds `report.lhs`.
    pub truncation_lhs: f64,
}

impl MeanShiftStability {
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.report.lhs <= self.truncation_lhs + tol
    }
}

/// `sup_x ‖mean(m_α^(ε)(x)) − mean(m_β^(ε)(x))‖ ≤ (1+2ε)·Φ(√d_{W,1}(α, β))`,
/// with `α` the cloud's weights.
pub fn verify_theorem_meanshift(
    cloud: &PointCloud,
    beta_weights: &[f64],
    epsilon: f64,
) -> Result<MeanShiftStability> {
    let alpha = from_point_cloud(cloud);
    let beta = beta_space(&alpha, beta_weights)?;
    let b = bound_inputs(&alpha, &beta, epsilon)?;
    let ma = truncations(&alpha, epsilon)?;
    let mb = truncations(&beta, epsilon)?;
    let lhs = ma
        .iter()
        .zip(&mb)
        .map(|(a, b)| euclidean(&a.mean(cloud), &b.mean(cloud)))
        .fold(0.0, f64::max);
    Ok(MeanShiftStability {
        report: finish(lhs, b.factor, epsilon, &b),
        truncation_lhs: truncation_lhs(&alpha, &beta, epsilon)?,
    })
}
