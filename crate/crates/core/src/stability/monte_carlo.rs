use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::localization::localize_truncation;
use crate::metric::{from_point_cloud, PointCloud};
use crate::parallel::{fill_indexed, pool};

use super::{check_gibbs_su, verify_theorem_meanshift, verify_theorem_metric, verify_theorem_truncation, SLACK_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    /// Each trial draws its point count uniformly from `2..=max_points`.
    pub max_points: usize,
    /// Fixed scale; when `None` each trial draws ε uniformly from
    /// `[0.1, 1.5] × median distance`.
    pub epsilon: Option<f64>,
    pub threads: usize,
}

/// One trial's slacks, in the order of [`MonteCarloReport::checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub n: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub wasserstein: f64,
    pub slacks: [f64; CHECKS],
}

const CHECKS: usize = 6;
const CHECK_NAMES: [&str; CHECKS] = [
    "truncation",
    "metric",
    "meanshift",
    "meanshift_chain",
    "gibbs_su_lower",
    "gibbs_su_upper",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub violations: usize,
    pub min_slack: f64,
    pub worst_trial: usize,
    /// Slack quantiles at 0, 10, 50, 90 and 100 percent.
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: MonteCarloConfig,
    pub checks: Vec<CheckSummary>,
    #[serde(skip)]
    pub trials: Vec<TrialOutcome>,
}

impl MonteCarloReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Random clouds in the unit square with random full-support `α`, and `β`
/// a multiplicative perturbation of `α` whose size cycles through 1%, 10%
/// and 100%. Trial `t` uses ChaCha8 stream `t` of `seed`.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if config.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if config.max_points < 2 {
        return Err(invalid("n_points", "must be at least 2"));
    }
    if let Some(e) = config.epsilon {
        if !(e > 0.0) || !e.is_finite() {
            return Err(invalid("epsilon", format!("must be positive, got {e}")));
        }
    }
    let workers = pool(config.threads)?;
    let mut trials = vec![None; config.trials];
    fill_indexed(&workers, &mut trials, |t| run_trial(config, t).map(Some))?;
    let trials: Vec<TrialOutcome> = trials.into_iter().flatten().collect();

    let checks = (0..CHECKS)
        .map(|c| {
            let mut slacks: Vec<(f64, usize)> = trials.iter().map(|t| (t.slacks[c], t.trial)).collect();
            slacks.sort_by(|a, b| a.0.total_cmp(&b.0));
            let q = |p: f64| slacks[((slacks.len() - 1) as f64 * p).round() as usize].0;
            CheckSummary {
                name: CHECK_NAMES[c].to_string(),
                violations: slacks.iter().filter(|s| s.0 < -SLACK_TOLERANCE).count(),
                min_slack: slacks[0].0,
                worst_trial: slacks[0].1,
                quantiles: [q(0.0), q(0.1), q(0.5), q(0.9), q(1.0)],
            }
        })
        .collect();
    Ok(MonteCarloReport {
        config: *config,
        checks,
        trials,
    })
}

fn run_trial(config: &MonteCarloConfig, t: usize) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(t as u64);
    let n = rng.gen_range(2..=config.max_points);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let alpha = normalize(&raw);
    let size = [0.01, 0.1, 1.0][t % 3];
    let beta = normalize(
        &alpha
            .iter()
            .map(|a| a * (1.0 + size * rng.gen_range(-0.95..1.0)))
            .collect::<Vec<_>>(),
    );
    let cloud = PointCloud::new(2, coords, Some(alpha))?;
    let space = from_point_cloud(&cloud);

    let mut dists: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| space.d(i, j)).collect();
    dists.sort_by(f64::total_cmp);
    let median = dists[dists.len() / 2];
    let epsilon = match config.epsilon {
        Some(e) => e,
        None => rng.gen_range(0.1..=1.5) * median,
    };

    let trunc = verify_theorem_truncation(&space, &beta, epsilon)?;
    let metric = verify_theorem_metric(&space, &beta, epsilon)?;
    let ms = verify_theorem_meanshift(&cloud, &beta, epsilon)?;
    let x = rng.gen_range(0..n);
    let beta_space = space.with_weights(beta)?;
    let gs = check_gibbs_su(
        &localize_truncation(&space, x, epsilon)?,
        &localize_truncation(&beta_space, x, epsilon)?,
        space.dist(),
        space.diameter(),
    )?;
    Ok(TrialOutcome {
        trial: t,
        n,
        epsilon,
        lambda: trunc.lambda.unwrap_or(1.0),
        wasserstein: trunc.distance,
        slacks: [
            trunc.slack,
            metric.slack,
            ms.report.slack,
            ms.truncation_lhs - ms.report.lhs,
            gs.lower.slack,
            gs.upper.slack,
        ],
    })
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}
