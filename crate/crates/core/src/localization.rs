//! Localization operators: each point is assigned a probability measure
//! summarizing its neighbourhood.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::{FiniteMetricMeasureSpace, PointCloud};
use crate::ot::LocalizedMeasure;

/// Gaussian kernel values below this are treated as zero.
pub const GAUSSIAN_CUTOFF: f64 = 1e-15;

/// Radial profile `K(t)` evaluated at `t = d / ε` (unsquared).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Truncation,
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Kernel::Truncation => {
                if (0.0..=1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => {
                let k = (-t / 2.0).exp();
                if k < GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    k
                }
            }
            Kernel::Epanechnikov => (1.0 - t).max(0.0),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncation" => Ok(Kernel::Truncation),
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            _ => Err(invalid("kernel", format!("unknown kernel `{s}`"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Truncation => "truncation",
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        })
    }
}

/// Localization applied inside the mean-shift wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerKind {
    #[default]
    Truncation,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationKind {
    #[default]
    Truncation,
    Kernel,
    /// Dirac at the Euclidean mean of the inner localization.
    MeanshiftWrap,
}

impl FromStr for LocalizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncation" => Ok(LocalizationKind::Truncation),
            "kernel" => Ok(LocalizationKind::Kernel),
            "meanshift" | "meanshift_wrap" | "meanshift-wrap" => Ok(LocalizationKind::MeanshiftWrap),
            _ => Err(invalid("localization", format!("unknown localization `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConfig {
    pub kind: LocalizationKind,
    pub epsilon: f64,
    pub kernel: Kernel,
    pub inner: InnerKind,
}

impl LocalizationConfig {
    pub fn truncation(epsilon: f64) -> Self {
        LocalizationConfig {
            kind: LocalizationKind::Truncation,
            epsilon,
            kernel: Kernel::Truncation,
            inner: InnerKind::Truncation,
        }
    }

    pub fn kernel(kernel: Kernel, epsilon: f64) -> Self {
        LocalizationConfig {
            kind: LocalizationKind::Kernel,
            kernel,
            ..Self::truncation(epsilon)
        }
    }

    pub fn meanshift(inner: InnerKind, kernel: Kernel, epsilon: f64) -> Self {
        LocalizationConfig {
            kind: LocalizationKind::MeanshiftWrap,
            epsilon,
            kernel,
            inner,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        LocalizationConfig { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)
    }

    /// The measure-valued part: truncation or kernel.
    fn measure_kind(&self) -> InnerKind {
        match self.kind {
            LocalizationKind::Truncation => InnerKind::Truncation,
            LocalizationKind::Kernel => InnerKind::Kernel,
            LocalizationKind::MeanshiftWrap => self.inner,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid("epsilon", format!("must be positive and finite, got {epsilon}")))
    }
}

/// `α` restricted to the closed ball `B_ε(x)` and renormalized.
pub fn localize_truncation(
    space: &FiniteMetricMeasureSpace,
    x: usize,
    epsilon: f64,
) -> Result<LocalizedMeasure> {
    check_epsilon(epsilon)?;
    check_index(space.len(), x)?;
    let ball = space.closed_ball(x, epsilon);
    let w = ball.iter().map(|&j| space.weights()[j]).collect();
    LocalizedMeasure::from_weights(ball, w)
}

/// Mass proportional to `α_j · K(d(x, j) / ε)`.
pub fn localize_kernel(
    space: &FiniteMetricMeasureSpace,
    x: usize,
    kernel: Kernel,
    epsilon: f64,
) -> Result<LocalizedMeasure> {
    check_epsilon(epsilon)?;
    check_index(space.len(), x)?;
    let (support, w): (Vec<usize>, Vec<f64>) = space
        .dist()
        .row(x)
        .iter()
        .zip(space.weights())
        .enumerate()
        .map(|(j, (&d, &a))| (j, a * kernel.eval(d / epsilon)))
        .filter(|&(_, w)| w > 0.0)
        .unzip();
    LocalizedMeasure::from_weights(support, w)
}

/// Truncation or kernel localization per `config`; the mean-shift wrapper
/// yields its inner measure here.
pub fn localize(
    space: &FiniteMetricMeasureSpace,
    x: usize,
    config: &LocalizationConfig,
) -> Result<LocalizedMeasure> {
    match config.measure_kind() {
        InnerKind::Truncation => localize_truncation(space, x, config.epsilon),
        InnerKind::Kernel => localize_kernel(space, x, config.kernel, config.epsilon),
    }
}

/// A Dirac at a point that is generally not in the data.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualDirac {
    /// Data point whose localization produced this Dirac.
    pub source: usize,
    pub position: Vec<f64>,
}

impl VirtualDirac {
    /// As a measure on the cloud of virtual points, indexed by `source`.
    pub fn measure(&self) -> LocalizedMeasure {
        LocalizedMeasure::dirac(self.source)
    }
}

/// Dirac at the Euclidean mean of the inner localization of `x`.
pub fn localize_meanshift(
    cloud: &PointCloud,
    x: usize,
    config: &LocalizationConfig,
) -> Result<VirtualDirac> {
    config.validate()?;
    check_index(cloud.len(), x)?;
    let position = inner_mean(cloud, x, config.measure_kind(), config.kernel, config.epsilon);
    Ok(VirtualDirac { source: x, position })
}

/// Weighted mean of the inner localization, straight from the coordinates.
pub(crate) fn inner_mean(
    cloud: &PointCloud,
    x: usize,
    inner: InnerKind,
    kernel: Kernel,
    epsilon: f64,
) -> Vec<f64> {
    let kernel = match inner {
        InnerKind::Truncation => Kernel::Truncation,
        InnerKind::Kernel => kernel,
    };
    let p = cloud.point(x);
    let mut num = vec![0.0; cloud.dim()];
    let mut den = 0.0;
    for (j, q) in cloud.points().enumerate() {
        let d = if j == x { 0.0 } else { crate::metric::euclidean(p, q) };
        let w = cloud.weights()[j] * kernel.eval(d / epsilon);
        if w > 0.0 {
            den += w;
            for (n, c) in num.iter_mut().zip(q) {
                *n += w * c;
            }
        }
    }
    num.iter_mut().for_each(|n| *n /= den);
    num
}

fn check_index(n: usize, x: usize) -> Result<()> {
    if x < n {
        Ok(())
    } else {
        Err(Error::Shape(format!("point index {x} out of range for {n} points")))
    }
}
