use crate::error::{Error, Result};

use super::{check_balance, LocalizedMeasure};

/// `d_{W,1}` between two measures on the line, `coords[i]` being the
/// position of ambient point `i`.
pub fn wasserstein_1d(mu: &LocalizedMeasure, nu: &LocalizedMeasure, coords: &[f64]) -> Result<f64> {
    let pos = |i: usize| {
        coords.get(i).copied().ok_or_else(|| {
            Error::Shape(format!("no coordinate for support point {i}"))
        })
    };
    let xs = mu.support().iter().map(|&i| pos(i)).collect::<Result<Vec<_>>>()?;
    let ys = nu.support().iter().map(|&i| pos(i)).collect::<Result<Vec<_>>>()?;
    wasserstein_1d_atoms(&xs, mu.mass(), &ys, nu.mass())
}

/// `∫ |F(t) − G(t)| dt` for two atomic measures, summed exactly over the
/// merged breakpoints. Masses must balance; positions may be unsorted.
pub fn wasserstein_1d_atoms(xs: &[f64], ws: &[f64], ys: &[f64], vs: &[f64]) -> Result<f64> {
    if xs.len() != ws.len() || ys.len() != vs.len() {
        return Err(Error::Shape("positions and masses differ in length".into()));
    }
    if xs.iter().chain(ys).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "1D atom position".into(),
        });
    }
    check_balance(ws.iter().sum(), vs.iter().sum())?;

    let mut events: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + ys.len());
    events.extend(xs.iter().zip(ws).map(|(&x, &w)| (x, w)));
    events.extend(ys.iter().zip(vs).map(|(&y, &v)| (y, -v)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = 0.0;
    let mut diff = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_pair_against_midpoint_dirac() {
        let w = wasserstein_1d_atoms(&[0.0, 1.0], &[0.5, 0.5], &[0.5], &[1.0]).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_measures() {
        let mu = LocalizedMeasure::new(vec![0, 2], vec![0.25, 0.75]).unwrap();
        assert_eq!(wasserstein_1d(&mu, &mu, &[0.0, 1.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn diracs() {
        let coords = [0.0, 2.0];
        let w = wasserstein_1d(
            &LocalizedMeasure::dirac(0),
            &LocalizedMeasure::dirac(1),
            &coords,
        )
        .unwrap();
        assert_eq!(w, 2.0);
    }

    #[test]
    fn unsorted_positions() {
        let a = wasserstein_1d_atoms(&[3.0, 0.0], &[0.5, 0.5], &[1.0], &[1.0]).unwrap();
        assert!((a - 1.5).abs() < 1e-15);
    }

    #[test]
    fn missing_coordinate() {
        let r = wasserstein_1d(&LocalizedMeasure::dirac(3), &LocalizedMeasure::dirac(0), &[0.0]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn imbalance() {
        assert!(matches!(
            wasserstein_1d_atoms(&[0.0], &[1.0], &[0.0], &[0.5]),
            Err(Error::MassImbalance { .. })
        ));
    }
}
