use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::FiniteMetricMeasureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Merges in order; leaves are `0..n`, merge `k` creates cluster `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Single linkage via Kruskal on all pairs; equal heights are taken in
/// order of the `(i, j)` index pair.
pub fn single_linkage(space: &FiniteMetricMeasureSpace) -> Result<Dendrogram> {
    let n = space.len();
    if n < 2 {
        return Err(invalid("space", "single linkage needs at least two points"));
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((space.d(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut uf = UnionFind::new(n);
    // Cluster id and size carried by each union-find root.
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);
    for (h, i, j) in edges {
        let (a, b) = (uf.find(i), uf.find(j));
        if a == b {
            continue;
        }
        let (ia, ib) = (id[a], id[b]);
        uf.parent[b] = a;
        size[a] += size[b];
        id[a] = n + merges.len();
        merges.push(Merge {
            left: ia.min(ib),
            right: ia.max(ib),
            height: h,
            size: size[a],
        });
        if merges.len() == n - 1 {
            break;
        }
    }
    Ok(Dendrogram { n, merges })
}

/// Labels after undoing the `k − 1` highest merges. Labels number the
/// clusters in order of their smallest member.
pub fn cut_dendrogram(d: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > d.n {
        return Err(invalid("k", format!("must lie in 1..={}, got {k}", d.n)));
    }
    let mut uf = UnionFind::new(2 * d.n);
    for (m, merge) in d.merges.iter().take(d.n - k).enumerate() {
        let node = d.n + m;
        uf.parent[merge.left] = node;
        uf.parent[merge.right] = node;
    }
    let mut label_of_root = std::collections::HashMap::new();
    Ok((0..d.n)
        .map(|i| {
            let r = uf.find(i);
            let next = label_of_root.len();
            *label_of_root.entry(r).or_insert(next)
        })
        .collect())
}
