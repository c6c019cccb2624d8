//! Seeded generators for the dumbbell and noisy-circle experiments.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, drawing `f64`
//! values in `[0, 1)` in a fixed order, so a seed gives the same cloud on
//! every platform.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    Desk,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            _ => Err(invalid("scale", format!("unknown scale `{s}`"))),
        }
    }
}

/// Two disk blobs joined by a straight chain along the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DumbbellSpec {
    pub blob_n: usize,
    pub chain_n: usize,
    pub blob_radius: f64,
    /// Blob centres sit at `(±center, 0)`.
    pub center: f64,
    /// Chain points get a vertical offset uniform in `[−jitter, jitter]`.
    pub jitter: f64,
    pub seed: u64,
}

impl DumbbellSpec {
    /// 100 + 30 + 100 points, diameter close to 4. Paper and desk scale agree.
    pub fn new(seed: u64) -> Self {
        DumbbellSpec {
            blob_n: 100,
            chain_n: 30,
            blob_radius: 0.5,
            center: 1.5,
            jitter: 0.0,
            seed,
        }
    }
}

/// Equally spaced circle points plus uniform outliers in a square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyCircleSpec {
    pub circle_n: usize,
    pub outlier_n: usize,
    pub radius: f64,
    /// Outliers are uniform in `[−box_half, box_half]²`.
    pub box_half: f64,
    pub seed: u64,
}

impl NoisyCircleSpec {
    pub fn new(scale: Scale, seed: u64) -> Self {
        let (circle_n, outlier_n) = match scale {
            Scale::Paper => (800, 1200),
            Scale::Desk => (200, 300),
        };
        NoisyCircleSpec {
            circle_n,
            outlier_n,
            radius: 1.0,
            box_half: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Dumbbell(DumbbellSpec),
    NoisyCircle(NoisyCircleSpec),
}

impl DatasetSpec {
    pub fn generate(&self) -> Result<PointCloud> {
        match self {
            DatasetSpec::Dumbbell(s) => gen_dumbbell(s),
            DatasetSpec::NoisyCircle(s) => gen_noisy_circle(s),
        }
    }
}

pub fn gen_dumbbell(spec: &DumbbellSpec) -> Result<PointCloud> {
    if spec.blob_n == 0 {
        return Err(invalid("blob_n", "must be positive"));
    }
    if !(spec.blob_radius > 0.0) || !(spec.center > spec.blob_radius) || !(spec.jitter >= 0.0) {
        return Err(invalid("geometry", "need 0 < blob_radius < center and jitter ≥ 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut coords = Vec::with_capacity(2 * (2 * spec.blob_n + spec.chain_n));
    let mut labels = Vec::new();
    let mut blob = |cx: f64, rng: &mut ChaCha8Rng, coords: &mut Vec<f64>, name: &str| {
        for _ in 0..spec.blob_n {
            let r = spec.blob_radius * rng.gen::<f64>().sqrt();
            let t = 2.0 * PI * rng.gen::<f64>();
            coords.push(cx + r * t.cos());
            coords.push(r * t.sin());
            labels.push(name.to_string());
        }
    };
    blob(-spec.center, &mut rng, &mut coords, "blob1");
    let from = -spec.center + spec.blob_radius;
    let gap = 2.0 * (spec.center - spec.blob_radius) / (spec.chain_n + 1) as f64;
    let mut chain_labels = Vec::new();
    for k in 0..spec.chain_n {
        let y = if spec.jitter > 0.0 {
            spec.jitter * (2.0 * rng.gen::<f64>() - 1.0)
        } else {
            0.0
        };
        coords.push(from + gap * (k + 1) as f64);
        coords.push(y);
        chain_labels.push("chain".to_string());
    }
    blob(spec.center, &mut rng, &mut coords, "blob2");
    let (b1, b2) = labels.split_at(spec.blob_n);
    let labels = [b1, &chain_labels, b2].concat();
    PointCloud::new(2, coords, None)?.with_labels(labels)
}

pub fn gen_noisy_circle(spec: &NoisyCircleSpec) -> Result<PointCloud> {
    if spec.circle_n + spec.outlier_n == 0 {
        return Err(invalid("circle_n", "need at least one point"));
    }
    if !(spec.radius > 0.0) || !(spec.box_half > 0.0) {
        return Err(invalid("geometry", "radius and box must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut coords = Vec::with_capacity(2 * (spec.circle_n + spec.outlier_n));
    let mut labels = Vec::new();
    for k in 0..spec.circle_n {
        let t = 2.0 * PI * k as f64 / spec.circle_n as f64;
        coords.push(spec.radius * t.cos());
        coords.push(spec.radius * t.sin());
        labels.push("circle".to_string());
    }
    for _ in 0..spec.outlier_n {
        coords.push(spec.box_half * (2.0 * rng.gen::<f64>() - 1.0));
        coords.push(spec.box_half * (2.0 * rng.gen::<f64>() - 1.0));
        labels.push("outlier".to_string());
    }
    PointCloud::new(2, coords, None)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(c: &PointCloud, label: &str) -> usize {
        c.labels().unwrap().iter().filter(|l| *l == label).count()
    }

    #[test]
    fn dumbbell_defaults() {
        let c = gen_dumbbell(&DumbbellSpec::new(7)).unwrap();
        assert_eq!(c.len(), 230);
        assert_eq!((count(&c, "blob1"), count(&c, "chain"), count(&c, "blob2")), (100, 30, 100));
        assert!((c.diameter() - 4.0).abs() <= 0.2, "{}", c.diameter());
        assert_eq!(c, gen_dumbbell(&DumbbellSpec::new(7)).unwrap());
        assert_ne!(c, gen_dumbbell(&DumbbellSpec::new(8)).unwrap());
    }

    #[test]
    fn dumbbell_without_chain() {
        let spec = DumbbellSpec {
            chain_n: 0,
            ..DumbbellSpec::new(1)
        };
        let c = gen_dumbbell(&spec).unwrap();
        assert_eq!(c.len(), 200);
        let left = c.points().take(100).all(|p| p[0] < -0.99);
        let right = c.points().skip(100).all(|p| p[0] > 0.99);
        assert!(left && right);
    }

    #[test]
    fn circle_counts_and_radii() {
        let c = gen_noisy_circle(&NoisyCircleSpec::new(Scale::Paper, 3)).unwrap();
        assert_eq!((count(&c, "circle"), count(&c, "outlier")), (800, 1200));
        assert_eq!(gen_noisy_circle(&NoisyCircleSpec::new(Scale::Desk, 3)).unwrap().len(), 500);
        let pure = NoisyCircleSpec {
            outlier_n: 0,
            ..NoisyCircleSpec::new(Scale::Desk, 3)
        };
        let c = gen_noisy_circle(&pure).unwrap();
        assert!(c.points().all(|p| (p[0].hypot(p[1]) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn outliers_in_box() {
        let c = gen_noisy_circle(&NoisyCircleSpec::new(Scale::Desk, 11)).unwrap();
        assert!(c.points().skip(200).all(|p| p[0].abs() <= 1.0 && p[1].abs() <= 1.0));
    }
}
