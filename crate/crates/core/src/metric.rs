//! Finite metric-measure spaces and Euclidean point clouds.
//!
//! A [`FiniteMetricMeasureSpace`] is a dense symmetric distance matrix paired
//! with a fully supported probability vector. Pseudometrics are allowed:
//! distinct points may sit at distance zero, which is what repeated
//! transforms tend to produce.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Absolute slack allowed in the triangle inequality.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Absolute slack allowed when checking that weights sum to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Dense row-major `n × n` matrix of ground distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps row-major data; fails unless `data.len() == n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "distance matrix needs {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        DistanceMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a symmetric matrix from the strict upper triangle, stored
    /// row by row (`(0,1), (0,2), …, (1,2), …`).
    pub fn from_condensed(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Shape(format!(
                "condensed matrix for n = {n} needs {} entries, got {}",
                n * n.saturating_sub(1) / 2,
                upper.len()
            )));
        }
        let mut m = DistanceMatrix::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                m.data[i * n + j] = upper[k];
                m.data[j * n + i] = upper[k];
                k += 1;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.n)
    }

    /// Largest entry (0 for an empty matrix).
    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Extracts the `rows.len() × cols.len()` block `d[rows[a]][cols[b]]`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            let row = self.row(r);
            out.extend(cols.iter().map(|&c| row[c]));
        }
        out
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { i: usize, j: usize },
    NonzeroDiagonal { i: usize, value: f64 },
    Negative { i: usize, j: usize, value: f64 },
    Asymmetric { i: usize, j: usize, forward: f64, backward: f64 },
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
    NonPositiveWeight { i: usize, value: f64 },
    WeightSum { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { i, j } => write!(f, "non-finite distance at ({i},{j})"),
            Violation::NonzeroDiagonal { i, value } => {
                write!(f, "diagonal entry ({i},{i}) is {value}")
            }
            Violation::Negative { i, j, value } => {
                write!(f, "negative distance {value} at ({i},{j})")
            }
            Violation::Asymmetric {
                i,
                j,
                forward,
                backward,
            } => write!(f, "asymmetry at ({i},{j}): {forward} vs {backward}"),
            Violation::Triangle { i, j, k, excess } => write!(
                f,
                "triangle inequality d({i},{k}) <= d({i},{j}) + d({j},{k}) violated by {excess}"
            ),
            Violation::NonPositiveWeight { i, value } => {
                write!(f, "weight {i} is {value}, must be positive")
            }
            Violation::WeightSum { sum } => write!(f, "weights sum to {sum}, expected 1"),
        }
    }
}

/// Outcome of [`FiniteMetricMeasureSpace::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let shown: Vec<String> = self.violations.iter().take(5).map(|v| v.to_string()).collect();
        let extra = self.violations.len().saturating_sub(5);
        let mut msg = shown.join("; ");
        if extra > 0 {
            msg.push_str(&format!("; and {extra} more"));
        }
        Err(Error::InvalidSpace(msg))
    }
}

/// The ambient data `(X, d_X, α)`: distances plus a full-support measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricMeasureSpace {
    dist: DistanceMatrix,
    weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl FiniteMetricMeasureSpace {
    /// Pairs a distance matrix with weights. Only shapes are checked here;
    /// call [`validate`](Self::validate) for the metric-measure invariants.
    pub fn new(dist: DistanceMatrix, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != dist.len() {
            return Err(Error::Shape(format!(
                "{} weights for a {}-point distance matrix",
                weights.len(),
                dist.len()
            )));
        }
        if dist.is_empty() {
            return Err(Error::Shape("a space needs at least one point".into()));
        }
        Ok(FiniteMetricMeasureSpace {
            dist,
            weights,
            labels: None,
        })
    }

    /// Same as [`new`](Self::new) with the uniform (empirical) measure.
    pub fn uniform(dist: DistanceMatrix) -> Result<Self> {
        let n = dist.len();
        Self::new(dist, uniform_weights(n))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    #[inline]
    pub fn dist(&self) -> &DistanceMatrix {
        &self.dist
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Same weights and labels over a new ground metric.
    pub fn with_dist(&self, dist: DistanceMatrix) -> Result<Self> {
        if dist.len() != self.len() {
            return Err(Error::Shape(format!(
                "replacement matrix has {} points, space has {}",
                dist.len(),
                self.len()
            )));
        }
        Ok(FiniteMetricMeasureSpace {
            dist,
            weights: self.weights.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Same ground metric with a different measure.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.dist.clone(), weights)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tolerance(TRIANGLE_TOLERANCE)
    }

    /// Checks every invariant, with `triangle_tol` slack on the triangle
    /// inequality.
    pub fn validate_with_tolerance(&self, triangle_tol: f64) -> ValidationReport {
        let n = self.len();
        let d = &self.dist;
        let mut violations = Vec::new();
        let mut finite = true;
        for i in 0..n {
            for j in 0..n {
                let v = d.get(i, j);
                if !v.is_finite() {
                    violations.push(Violation::NonFinite { i, j });
                    finite = false;
                    continue;
                }
                if i == j {
                    if v != 0.0 {
                        violations.push(Violation::NonzeroDiagonal { i, value: v });
                    }
                    continue;
                }
                if v < 0.0 {
                    violations.push(Violation::Negative { i, j, value: v });
                }
                if i < j && v != d.get(j, i) {
                    violations.push(Violation::Asymmetric {
                        i,
                        j,
                        forward: v,
                        backward: d.get(j, i),
                    });
                }
            }
        }
        if finite {
            for i in 0..n {
                let ri = d.row(i);
                for j in 0..n {
                    let dij = ri[j];
                    let rj = d.row(j);
                    for k in 0..n {
                        let excess = ri[k] - (dij + rj[k]);
                        if excess > triangle_tol {
                            violations.push(Violation::Triangle { i, j, k, excess });
                        }
                    }
                }
            }
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                violations.push(Violation::NonPositiveWeight { i, value: w });
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            violations.push(Violation::WeightSum { sum });
        }
        ValidationReport { violations }
    }

    /// Indices `j` with `d(center, j) <= radius`, ascending.
    pub fn closed_ball(&self, center: usize, radius: f64) -> Vec<usize> {
        closed_ball_in(&self.dist, center, radius)
    }

    /// `α(B_r(center))` for the closed ball.
    pub fn ball_mass(&self, center: usize, radius: f64) -> f64 {
        self.dist
            .row(center)
            .iter()
            .zip(&self.weights)
            .filter(|(&d, _)| d <= radius)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.max_entry()
    }

    /// Smallest strictly positive distance, if any.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .as_slice()
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
    }
}

pub(crate) fn closed_ball_in(dist: &DistanceMatrix, center: usize, radius: f64) -> Vec<usize> {
    dist.row(center)
        .iter()
        .enumerate()
        .filter(|(j, &d)| d <= radius || *j == center)
        .map(|(j, _)| j)
        .collect()
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Points in `R^dim` with an optional measure (uniform by default).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    /// Builds a cloud from row vectors with uniform weights.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Shape(format!(
                    "point {i} has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords, None)
    }

    /// Row-major coordinates; `weights = None` means uniform.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "point clouds need dimension >= 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not split into rows of {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::Shape("a point cloud needs at least one point".into()));
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coordinate {} of point {}", k % dim, k / dim),
            });
        }
        let weights = match weights {
            Some(w) => {
                check_weights(&w, n)?;
                w
            }
            None => uniform_weights(n),
        };
        Ok(PointCloud {
            dim,
            coords,
            weights,
            labels: None,
        })
    }

    /// A 1D cloud.
    pub fn from_line(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec(), None)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, self.len())?;
        self.weights = weights;
        Ok(self)
    }

    /// Same weights and labels at new positions.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::Shape("replacement coordinates change the cloud size".into()));
        }
        let mut out = Self::new(self.dim, coords, Some(self.weights.clone()))?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Pairwise Euclidean distance matrix.
    pub fn distance_matrix(&self) -> DistanceMatrix {
        let n = self.len();
        let mut m = DistanceMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.distance(i, j);
                m.data[i * n + j] = d;
                m.data[j * n + i] = d;
            }
        }
        m
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Shape(format!("{} weights for {n} points", w.len())));
    }
    if let Some(i) = w.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidMeasure(format!(
            "weight {i} is {}, weights must be strictly positive",
            w[i]
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidMeasure(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The metric-measure space of a Euclidean cloud (weights and labels carried
/// over).
pub fn from_point_cloud(cloud: &PointCloud) -> FiniteMetricMeasureSpace {
    FiniteMetricMeasureSpace {
        dist: cloud.distance_matrix(),
        weights: cloud.weights.clone(),
        labels: cloud.labels.clone(),
    }
}
