use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::FiniteMetricMeasureSpace;

/// Eigenvalues at or below this fraction of the largest are not positive.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub n: usize,
    pub k: usize,
    /// Row-major `n × k`.
    pub coords: Vec<f64>,
    /// Full spectrum of the centred Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Trailing columns filled with zeros for lack of positive eigenvalues.
    pub padded: usize,
}

impl Embedding {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.k..(i + 1) * self.k]
    }
}

/// Classical MDS: eigenvectors of `−½ J D² J` scaled by the square roots
/// of the top `k` positive eigenvalues. Each eigenvector is signed so its
/// first entry of non-negligible size is positive.
pub fn classical_mds(space: &FiniteMetricMeasureSpace, k: usize) -> Result<Embedding> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    let n = space.len();
    let sq = DMatrix::from_fn(n, n, |i, j| space.d(i, j).powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let total = row_means.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + total));

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let threshold = EIGEN_TOLERANCE * top.max(f64::MIN_POSITIVE);

    let mut coords = vec![0.0; n * k];
    let mut padded = 0;
    for (c, &col) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[col];
        if !(lambda > threshold) {
            padded += 1;
            continue;
        }
        let v = eig.eigenvectors.column(col);
        let scale = v.amax();
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-8 * scale)
            .map_or(1.0, |x| x.signum());
        let s = sign * lambda.sqrt();
        for i in 0..n {
            coords[i * k + c] = s * v[i];
        }
    }
    padded += k.saturating_sub(n);
    Ok(Embedding {
        n,
        k,
        coords,
        eigenvalues,
        padded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{euclidean, from_point_cloud, DistanceMatrix, PointCloud};
    use proptest::prelude::*;

    fn reconstruction_error(s: &FiniteMetricMeasureSpace, e: &Embedding) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                worst = worst.max((euclidean(e.point(i), e.point(j)) - s.d(i, j)).abs());
            }
        }
        worst
    }

    #[test]
    fn line_is_reproduced() {
        let s = from_point_cloud(&PointCloud::from_line(&[0.0, 1.0, 2.0]).unwrap());
        let e = classical_mds(&s, 1).unwrap();
        assert!(reconstruction_error(&s, &e) < 1e-9);
        assert_eq!(e.padded, 0);
        assert!(e.point(0)[0] > 0.0);
    }

    #[test]
    fn equilateral_triangle() {
        let s = FiniteMetricMeasureSpace::uniform(
            DistanceMatrix::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let e = classical_mds(&s, 2).unwrap();
        assert!(reconstruction_error(&s, &e) < 1e-9);
    }

    #[test]
    fn pads_missing_dimensions() {
        let s = from_point_cloud(&PointCloud::from_line(&[0.0, 1.0, 3.0]).unwrap());
        let e = classical_mds(&s, 3).unwrap();
        assert_eq!(e.padded, 2);
        assert!((0..3).all(|i| e.point(i)[1] == 0.0 && e.point(i)[2] == 0.0));
        let e = classical_mds(&s, 5).unwrap();
        assert_eq!(e.padded, 4);
    }

    #[test]
    fn non_euclidean_reports_negative_eigenvalues() {
        // Four points with a "star" metric that is not Euclidean.
        let s = FiniteMetricMeasureSpace::uniform(
            DistanceMatrix::from_rows(&[
                vec![0.0, 2.0, 2.0, 1.0],
                vec![2.0, 0.0, 2.0, 1.0],
                vec![2.0, 2.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let e = classical_mds(&s, 2).unwrap();
        assert!(e.eigenvalues.iter().any(|&l| l < -1e-6));
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    proptest! {
        #[test]
        fn euclidean_input_is_reconstructed(
            dim in 1usize..4, coords in prop::collection::vec(-3.0f64..3.0, 3..60)
        ) {
            let m = coords.len() / dim * dim;
            prop_assume!(m / dim >= 2);
            let cloud = PointCloud::new(dim, coords[..m].to_vec(), None).unwrap();
            let s = from_point_cloud(&cloud);
            let e = classical_mds(&s, dim).unwrap();
            prop_assert!(reconstruction_error(&s, &e) < 1e-6);
        }
    }
}
