//! Single-linkage clustering and classical multidimensional scaling.

mod linkage;
mod mds;

pub use linkage::{cut_dendrogram, single_linkage, Dendrogram, Merge};
pub use mds::{classical_mds, Embedding, EIGEN_TOLERANCE};
