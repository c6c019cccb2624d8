use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::FiniteMetricMeasureSpace;

/// Relative margin by which the bound `D` exceeds the diameter.
pub const DIAMETER_MARGIN: f64 = 1e-6;

/// Radii closer than this relative gap count as one breakpoint.
pub const RADIUS_MERGE: f64 = 1e-9;

/// `ψ_{Λ,D}(r) = min(1, (r/D)^Λ)`.
pub fn psi(lambda: f64, d: f64, r: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("D", d), ("r", r)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be positive, got {v}")));
        }
    }
    Ok((r / d).powf(lambda).min(1.0))
}

/// `Φ_{Λ,D,ε}(η) = η / ψ_{Λ,D}(ε) + (1 + η/ε)^Λ − 1`.
pub fn phi(lambda: f64, d: f64, epsilon: f64, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(invalid("eta", format!("must be nonnegative, got {eta}")));
    }
    let p = psi(lambda, d, epsilon)?;
    Ok(eta / p + ((1.0 + eta / epsilon).powf(lambda) - 1.0))
}

/// Strict upper bound on the diameter used by the verifiers.
pub fn diameter_bound(space: &FiniteMetricMeasureSpace) -> f64 {
    let diam = space.diameter();
    if diam > 0.0 {
        diam * (1.0 + DIAMETER_MARGIN)
    } else {
        1.0
    }
}

/// Least `Λ` over the breakpoint radii, with the triple attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingCertificate {
    pub lambda: f64,
    /// `(x, r1, r2)`; `None` when every ratio is 1 and `Λ = 1` by convention.
    pub witness: Option<(usize, f64, f64)>,
    /// The radius `D` included among the breakpoints.
    pub d: f64,
}

/// Smallest `Λ` with `α(B_{r1}(x)) / α(B_{r2}(x)) ≤ (r1/r2)^Λ` for every
/// point `x` and every pair `r1 > r2` of radii drawn from the distinct
/// positive distances together with `D`.
///
/// Ball masses are step functions of the radius, so for fixed `x` the
/// ratio exponent is largest with `r1` at a jump of `α(B_·(x))` and `r2` at
/// the largest candidate radius below the next jump. Only those pairs are
/// scanned.
pub fn certify_doubling(space: &FiniteMetricMeasureSpace) -> DoublingCertificate {
    certify_doubling_with(space, diameter_bound(space))
}

pub fn certify_doubling_with(space: &FiniteMetricMeasureSpace, d: f64) -> DoublingCertificate {
    let n = space.len();
    let mut positive: Vec<f64> = space
        .dist()
        .as_slice()
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .chain([d])
        .collect();
    positive.sort_by(f64::total_cmp);
    let radii = merge_radii(&positive);
    let canonical = |r: f64| {
        if r > 0.0 {
            radii[radii.partition_point(|&c| c < r)]
        } else {
            0.0
        }
    };

    let mut best = 0.0;
    let mut witness = None;
    let w = space.weights();
    for x in 0..n {
        // Jumps of the ball mass: distinct distances from x with the
        // cumulative mass reached there.
        let mut order: Vec<(f64, usize)> = (0..n).map(|j| (canonical(space.d(x, j)), j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        let mut cum = 0.0;
        for &(r, j) in &order {
            cum += w[j];
            match jumps.last_mut() {
                Some(last) if last.0 == r => last.1 = cum,
                _ => jumps.push((r, cum)),
            }
        }
        for (k, &(r1, m1)) in jumps.iter().enumerate() {
            if !(r1 > 0.0) {
                continue;
            }
            // Candidate r2 per earlier level: the largest radius below the
            // next jump.
            for l in 0..k {
                let Some(r2) = largest_below(&radii, jumps[l + 1].0) else {
                    continue;
                };
                let e = (m1 / jumps[l].1).ln() / (r1 / r2).ln();
                if e > best {
                    best = e;
                    witness = Some((x, r1, r2));
                }
            }
        }
    }
    if best > 0.0 {
        DoublingCertificate {
            lambda: best,
            witness,
            d,
        }
    } else {
        DoublingCertificate {
            lambda: 1.0,
            witness: None,
            d,
        }
    }
}

/// Groups sorted radii whose consecutive relative gaps are within
/// `RADIUS_MERGE`, keeping the largest of each group, so that rounding noise
/// in nominally equal distances does not create spurious breakpoints.
fn merge_radii(sorted: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &r in sorted {
        match out.last_mut() {
            Some(last) if r - *last <= RADIUS_MERGE * r => *last = r,
            _ => out.push(r),
        }
    }
    out
}

fn largest_below(sorted: &[f64], upper: f64) -> Option<f64> {
    let k = sorted.partition_point(|&r| r < upper);
    (k > 0).then(|| sorted[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{from_point_cloud, DistanceMatrix, PointCloud};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every pair of candidate radii, no shortcuts.
    fn brute_lambda(space: &FiniteMetricMeasureSpace, d: f64) -> f64 {
        let mut radii: Vec<f64> = space.dist().as_slice().iter().copied().filter(|&r| r > 0.0).collect();
        radii.push(d);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let mut best: f64 = 0.0;
        for x in 0..space.len() {
            for &r1 in &radii {
                for &r2 in radii.iter().filter(|&&r| r < r1) {
                    let e = (space.ball_mass(x, r1) / space.ball_mass(x, r2)).ln() / (r1 / r2).ln();
                    best = best.max(e);
                }
            }
        }
        if best > 0.0 {
            best
        } else {
            1.0
        }
    }

    #[test]
    fn psi_and_phi_values() {
        assert_eq!(psi(2.0, 2.0, 1.0).unwrap(), 0.25);
        assert_eq!(psi(1.0, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(psi(3.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(phi(1.0, 1.0, 0.5, 0.0).unwrap(), 0.0);
        assert!((phi(1.0, 1.0, 0.5, 0.1).unwrap() - 0.4).abs() < 1e-15);
        assert!(phi(1.0, 1.0, 0.5, 0.2).unwrap() > phi(1.0, 1.0, 0.5, 0.1).unwrap());
        assert!(psi(0.0, 1.0, 1.0).is_err());
        assert!(phi(1.0, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn single_point_convention() {
        let s = FiniteMetricMeasureSpace::uniform(DistanceMatrix::zeros(1)).unwrap();
        let c = certify_doubling(&s);
        assert_eq!(c.lambda, 1.0);
        assert!(c.witness.is_none());
    }

    #[test]
    fn two_points() {
        let s = from_point_cloud(&PointCloud::from_line(&[0.0, 1.0]).unwrap());
        let c = certify_doubling(&s);
        // Candidates are {1, D}; both balls are full there.
        assert_eq!(c.lambda, 1.0);
        let three = from_point_cloud(&PointCloud::from_line(&[0.0, 1.0, 3.0]).unwrap());
        let c = certify_doubling(&three);
        assert!((c.lambda - brute_lambda(&three, c.d)).abs() < 1e-12);
    }

    #[test]
    fn grid_on_segment_is_nearly_one_dimensional() {
        for n in [10usize, 40, 160] {
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let s = from_point_cloud(&PointCloud::from_line(&xs).unwrap());
            let c = certify_doubling(&s);
            // Breakpoint radii approach one dimension from below.
            assert!(c.lambda <= 1.0 + 1e-9, "{}", c.lambda);
            assert!(c.lambda >= 1.0 - 1.5 / n as f64, "{}", c.lambda);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let radii: Vec<f64> = (1..n).map(|k| k as f64 / (n - 1) as f64).chain([c.d]).collect();
            for _ in 0..2000 {
                let x = rng.gen_range(0..n);
                let r1 = radii[rng.gen_range(0..radii.len())];
                let r2 = radii[rng.gen_range(0..radii.len())];
                if r1 < r2 {
                    continue;
                }
                let grow = 1.0 + RADIUS_MERGE;
                let ratio = s.ball_mass(x, r1 * grow) / s.ball_mass(x, r2 * grow);
                assert!(ratio <= (r1 / r2).powf(c.lambda) * (1.0 + 1e-9));
            }
        }
    }

    fn space_strategy() -> impl Strategy<Value = FiniteMetricMeasureSpace> {
        (1usize..10).prop_flat_map(|n| {
            (
                prop::collection::vec(-2.0f64..2.0, 2 * n),
                prop::collection::vec(0.05f64..1.0, n),
            )
                .prop_map(move |(c, w)| {
                    let t: f64 = w.iter().sum();
                    let w = w.iter().map(|x| x / t).collect();
                    from_point_cloud(&PointCloud::new(2, c, Some(w)).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn shortcut_matches_all_pairs(s in space_strategy()) {
            let c = certify_doubling(&s);
            prop_assert!((c.lambda - brute_lambda(&s, c.d)).abs() <= 1e-9 * c.lambda.max(1.0));
        }

        #[test]
        fn psi_bounds_ball_mass(s in space_strategy()) {
            let c = certify_doubling(&s);
            for x in 0..s.len() {
                for &r in s.dist().as_slice().iter().filter(|&&r| r > 0.0) {
                    prop_assert!(s.ball_mass(x, r) >= psi(c.lambda, c.d, r).unwrap() - 1e-9);
                }
            }
        }

        #[test]
        fn phi_is_monotone_from_zero(
            lambda in 0.1f64..5.0, d in 0.1f64..10.0, eps in 0.01f64..5.0,
            a in 0.0f64..3.0, b in 0.0f64..3.0
        ) {
            prop_assert_eq!(phi(lambda, d, eps, 0.0).unwrap(), 0.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(phi(lambda, d, eps, lo).unwrap() <= phi(lambda, d, eps, hi).unwrap());
        }
    }
}
