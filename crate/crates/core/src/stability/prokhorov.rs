use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;
use crate::ot::LocalizedMeasure;

/// Largest combined support accepted by [`prokhorov_bruteforce`].
pub const PROKHOROV_SUPPORT_LIMIT: usize = 15;

/// `d_P(mu, nu) = inf{δ > 0 : mu(A) ≤ nu(A^δ) + δ for all A ⊆ supp mu}`,
/// with the strict fattening `A^δ = {y : d(y, A) < δ}`.
///
/// For one subset `A`, `nu(A^δ)` is a left-continuous step function of `δ`
/// with jumps just after the distances from `A` to the support of `nu`, so
/// the infimum of feasible `δ` for `A` is found exactly on each constant
/// piece. `d_P` is the maximum of these over all nonempty subsets.
pub fn prokhorov_bruteforce(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    ground: &DistanceMatrix,
) -> Result<f64> {
    let mut combined: Vec<usize> = mu.support().iter().chain(nu.support()).copied().collect();
    combined.sort_unstable();
    combined.dedup();
    if combined.len() > PROKHOROV_SUPPORT_LIMIT {
        return Err(Error::SupportTooLarge {
            size: combined.len(),
            limit: PROKHOROV_SUPPORT_LIMIT,
        });
    }
    if let Some(&i) = combined.iter().find(|&&i| i >= ground.len()) {
        return Err(Error::Shape(format!("support point {i} outside the ground matrix")));
    }
    let m = mu.len();
    let mut worst: f64 = 0.0;
    let mut near = vec![0.0; nu.len()];
    for set in 1u32..(1 << m) {
        let mass_a: f64 = (0..m).filter(|k| set >> k & 1 == 1).map(|k| mu.mass()[k]).sum();
        for (slot, &y) in near.iter_mut().zip(nu.support()) {
            *slot = (0..m)
                .filter(|k| set >> k & 1 == 1)
                .map(|k| ground.get(mu.support()[k], y))
                .fold(f64::INFINITY, f64::min);
        }
        worst = worst.max(subset_threshold(mass_a, &near, nu.mass()));
    }
    Ok(worst.min(1.0))
}

/// `inf{δ > 0 : mass_a ≤ ν{y : near[y] < δ} + δ}`.
pub(crate) fn subset_threshold(mass_a: f64, near: &[f64], nu_mass: &[f64]) -> f64 {
    let mut levels: Vec<(f64, f64)> = near.iter().copied().zip(nu_mass.iter().copied()).collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    // On (lo, hi] the fattening holds exactly the mass at distance ≤ lo.
    let mut lo = 0.0;
    let mut covered = 0.0;
    let mut k = 0;
    while k < levels.len() && levels[k].0 <= 0.0 {
        covered += levels[k].1;
        k += 1;
    }
    loop {
        let hi = if k < levels.len() { levels[k].0 } else { f64::INFINITY };
        let need = mass_a - covered;
        let candidate = need.max(lo);
        if candidate <= hi {
            return candidate.max(0.0);
        }
        lo = hi;
        let d = levels[k].0;
        while k < levels.len() && levels[k].0 == d {
            covered += levels[k].1;
            k += 1;
        }
    }
}
