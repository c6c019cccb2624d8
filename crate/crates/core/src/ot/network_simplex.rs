//! Primal network simplex for the dense transportation problem.
//!
//! Rows `0..m` and columns `m..m+n` are the nodes of a bipartite graph; the
//! basis is a spanning tree of `m + n - 1` cells rooted at row 0. The initial
//! tree comes from the north-west corner rule and is strongly feasible
//! (zero-flow tree cells always hang a column below a row). Entering cells
//! are picked by block search; the leaving cell is the last blocking cell
//! met when walking the cycle from its apex, which keeps the tree strongly
//! feasible and rules out cycling.

use crate::error::{Error, Result};

use super::check_balance;

const NONE: usize = usize::MAX;
const MIN_BLOCK: usize = 10;
const REDUCED_COST_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct TransportSolution {
    /// Basic cells `(row, col, flow)`; degenerate cells carry zero flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    pot: Vec<f64>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
    cells: Vec<Cell>,
    next_search: usize,
    block: usize,
    tol: f64,
    up_a: Vec<usize>,
    up_b: Vec<usize>,
    stack: Vec<usize>,
}

/// Solves `min Σ c[r][c]·x[r][c]` over couplings of `supply` and `demand`.
///
/// `cost` is row-major `supply.len() × demand.len()`. Masses need not sum to
/// one but must balance within `IMBALANCE_TOLERANCE`.
pub(crate) fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::Shape(format!(
            "cost has {} entries for a {m}×{n} problem",
            cost.len()
        )));
    }
    if supply.iter().chain(demand).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidMeasure("negative or non-finite mass".into()));
    }
    check_balance(supply.iter().sum(), demand.iter().sum())?;

    let mut s = Simplex::north_west(supply, demand, cost);
    let limit = 50 * (m * n + m + n) + 1000;
    let mut pivots = 0;
    while let Some((k, rc)) = s.entering() {
        s.pivot(k / n, k % n, rc);
        pivots += 1;
        if pivots > limit {
            return Err(Error::PivotLimit { limit });
        }
    }
    let cost_total = s
        .cells
        .iter()
        .map(|c| c.flow * cost[c.row * n + c.col - m])
        .sum();
    Ok(TransportSolution {
        flows: s.cells.iter().map(|c| (c.row, c.col - m, c.flow)).collect(),
        cost: cost_total,
    })
}

impl<'a> Simplex<'a> {
    fn north_west(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let nodes = m + n;
        let cmax = cost.iter().copied().fold(0.0, f64::max);
        let mut s = Simplex {
            m,
            n,
            cost,
            pot: vec![0.0; nodes],
            parent: vec![NONE; nodes],
            parent_cell: vec![NONE; nodes],
            depth: vec![0; nodes],
            adj: vec![Vec::new(); nodes],
            cells: Vec::with_capacity(nodes - 1),
            next_search: 0,
            block: ((m * n) as f64).sqrt().ceil().max(MIN_BLOCK as f64) as usize,
            tol: REDUCED_COST_TOL * cmax,
            up_a: Vec::new(),
            up_b: Vec::new(),
            stack: Vec::new(),
        };

        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (supply[0], demand[0]);
        // The node introduced by the current cell, and its tree parent.
        let (mut child, mut par) = (m, 0);
        loop {
            let last_row = i == m - 1;
            let last_col = j == n - 1;
            let flow;
            let advance_row;
            if last_row && last_col {
                s.link(child, par, i, j, rb.max(0.0));
                break;
            } else if last_row {
                flow = rb;
                ra -= rb;
                advance_row = false;
            } else if last_col || ra < rb {
                flow = ra;
                rb -= ra;
                advance_row = true;
            } else {
                flow = rb;
                ra -= rb;
                advance_row = false;
            }
            s.link(child, par, i, j, flow);
            if advance_row {
                i += 1;
                ra = supply[i];
                child = i;
                par = m + j;
            } else {
                j += 1;
                rb = demand[j];
                child = m + j;
                par = i;
            }
        }
        s.recompute_from_root();
        s
    }

    fn link(&mut self, child: usize, par: usize, row: usize, col: usize, flow: f64) {
        let id = self.cells.len();
        self.cells.push(Cell {
            row,
            col: self.m + col,
            flow,
        });
        self.adj[child].push((par, id));
        self.adj[par].push((child, id));
        self.parent[child] = par;
        self.parent_cell[child] = id;
    }

    fn recompute_from_root(&mut self) {
        self.pot[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = NONE;
        self.stack.clear();
        self.stack.push(0);
        while let Some(u) = self.stack.pop() {
            for k in 0..self.adj[u].len() {
                let (v, id) = self.adj[u][k];
                if v == self.parent[u] {
                    continue;
                }
                self.parent[v] = u;
                self.parent_cell[v] = id;
                self.depth[v] = self.depth[u] + 1;
                let c = self.cells[id];
                let cc = self.cost[c.row * self.n + (c.col - self.m)];
                self.pot[v] = cc - self.pot[u];
                self.stack.push(v);
            }
        }
    }

    /// Block search for a cell with negative reduced cost.
    fn entering(&mut self) -> Option<(usize, f64)> {
        let total = self.m * self.n;
        let (m, n) = (self.m, self.n);
        let mut best = NONE;
        let mut min = -self.tol;
        let mut count = 0;
        let mut k = self.next_search;
        let (mut i, mut j) = (k / n, k % n);
        for _ in 0..total {
            let rc = self.cost[k] - self.pot[i] - self.pot[m + j];
            if rc < min {
                min = rc;
                best = k;
            }
            k += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if k == total {
                    k = 0;
                    i = 0;
                }
            }
            count += 1;
            if count == self.block {
                if best != NONE {
                    break;
                }
                count = 0;
            }
        }
        self.next_search = k;
        (best != NONE).then_some((best, min))
    }

    fn pivot(&mut self, row: usize, col: usize, reduced_cost: f64) {
        let m = self.m;
        let ri = row;
        let cj = m + col;

        self.up_a.clear();
        self.up_b.clear();
        let (mut a, mut b) = (ri, cj);
        while self.depth[a] > self.depth[b] {
            self.up_a.push(a);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            self.up_b.push(b);
            b = self.parent[b];
        }
        while a != b {
            self.up_a.push(a);
            a = self.parent[a];
            self.up_b.push(b);
            b = self.parent[b];
        }

        // Cells whose flow decreases: on the row side those hanging a row
        // below its parent, on the column side those hanging a column.
        let mut theta = f64::INFINITY;
        let mut leave = NONE;
        let mut leave_on_row_side = true;
        for &w in &self.up_a {
            if w < m {
                let f = self.cells[self.parent_cell[w]].flow;
                if f < theta {
                    theta = f;
                    leave = w;
                }
            }
        }
        for &w in &self.up_b {
            if w >= m {
                let f = self.cells[self.parent_cell[w]].flow;
                if f <= theta {
                    theta = f;
                    leave = w;
                    leave_on_row_side = false;
                }
            }
        }
        debug_assert!(leave != NONE);

        if theta > 0.0 {
            for &w in &self.up_a {
                let c = &mut self.cells[self.parent_cell[w]];
                if w < m {
                    c.flow -= theta;
                } else {
                    c.flow += theta;
                }
            }
            for &w in &self.up_b {
                let c = &mut self.cells[self.parent_cell[w]];
                if w >= m {
                    c.flow -= theta;
                } else {
                    c.flow += theta;
                }
            }
        }

        let out = self.parent_cell[leave];
        let old_parent = self.parent[leave];
        self.cells[out].flow = 0.0;
        remove_adj(&mut self.adj[leave], out);
        remove_adj(&mut self.adj[old_parent], out);

        self.cells[out] = Cell {
            row: ri,
            col: cj,
            flow: theta,
        };
        self.adj[ri].push((cj, out));
        self.adj[cj].push((ri, out));

        // The detached subtree contains the entering endpoint on the side of
        // the leaving cell; re-hang it from the other endpoint.
        let (sub_root, attach) = if leave_on_row_side { (ri, cj) } else { (cj, ri) };
        let shift_rows = if sub_root < m {
            reduced_cost
        } else {
            -reduced_cost
        };
        self.parent[sub_root] = attach;
        self.parent_cell[sub_root] = out;
        self.depth[sub_root] = self.depth[attach] + 1;
        self.stack.clear();
        self.stack.push(sub_root);
        while let Some(u) = self.stack.pop() {
            if u < m {
                self.pot[u] += shift_rows;
            } else {
                self.pot[u] -= shift_rows;
            }
            let pu = self.parent[u];
            let du = self.depth[u] + 1;
            for k in 0..self.adj[u].len() {
                let (v, id) = self.adj[u][k];
                if v == pu {
                    continue;
                }
                self.parent[v] = u;
                self.parent_cell[v] = id;
                self.depth[v] = du;
                self.stack.push(v);
            }
        }
    }
}

fn remove_adj(list: &mut Vec<(usize, usize)>, cell: usize) {
    if let Some(pos) = list.iter().position(|&(_, id)| id == cell) {
        list.remove(pos);
    }
}
