#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod datasets;
pub mod error;
pub mod localization;
pub mod meanshift;
pub mod metric;
pub mod ot;
pub mod parallel;
pub mod stability;
pub mod transform;

pub use error::{Error, Result};
pub use metric::{DistanceMatrix, FiniteMetricMeasureSpace, PointCloud};
