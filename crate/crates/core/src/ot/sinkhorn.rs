//! Entropic transport by Sinkhorn scaling.
//!
//! Potentials `(f, g)` parametrize the plan `P = exp((f ⊕ g − C) / reg)`.
//! Iterations run on scaling vectors over the kernel `exp((f ⊕ g − C)/reg)`;
//! whenever a scaling entry drifts out of `[1e-300, 1e300]` (checked with a
//! wide safety margin) it is absorbed into the potentials and the kernel is
//! rebuilt. If a rebuilt kernel underflows on a whole row or column the stage
//! continues with log-sum-exp updates instead. The regularization decreases
//! geometrically along a schedule, warm-starting each stage.
//!
//! The final plan is rounded onto the transport polytope, so both marginals
//! hold to rounding error even when the iteration budget runs out. The
//! reported cost is `⟨P, C⟩` without the entropy term.

use crate::error::{Error, Result};

use super::{check_balance, GroundCost, LocalizedMeasure, SolverConfig, TransportPlan};

const ABSORB_ABOVE: f64 = 1e50;
const ABSORB_BELOW: f64 = 1e-50;
const SCHEDULE_FACTOR: f64 = 10.0;

/// Diagnostics of one Sinkhorn solve.
#[derive(Debug, Clone)]
pub struct SinkhornOutcome {
    pub plan: TransportPlan,
    /// Total scaling iterations over all stages.
    pub iterations: usize,
    /// L1 row-marginal residual before rounding, final stage.
    pub residual: f64,
    pub converged: bool,
    /// Final regularization in distance units.
    pub reg: f64,
    pub used_log_domain: bool,
}

/// Sinkhorn estimate of `d_{W,1}(mu, nu)`; see [`sinkhorn_with_report`].
pub fn wasserstein_sinkhorn(
    mu: &LocalizedMeasure,
    nu: &LocalizedMeasure,
    ground: &GroundCost,
    config: &SolverConfig,
) -> Result<TransportPlan> {
    sinkhorn_with_report(mu.mass(), nu.mass(), ground, config).map(|o| o.plan)
}

/// Runs the regularization schedule on raw marginals.
pub fn sinkhorn_with_report(
    a: &[f64],
    b: &[f64],
    ground: &GroundCost,
    config: &SolverConfig,
) -> Result<SinkhornOutcome> {
    config.validate()?;
    let (m, n) = (a.len(), b.len());
    if ground.rows() != m || ground.cols() != n {
        return Err(Error::Shape(format!(
            "ground block is {}×{}, marginals are {m}×{n}",
            ground.rows(),
            ground.cols()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    check_balance(a.iter().sum(), b.iter().sum())?;
    let c = ground.as_slice();
    let cmax = ground.max_entry();
    let reg = config
        .sinkhorn_reg
        .unwrap_or(super::DEFAULT_SINKHORN_REG * cmax);

    if m == 1 || n == 1 || cmax == 0.0 {
        // The independent coupling is the only one (or all are optimal).
        let plan = if m == 1 {
            b.to_vec()
        } else if n == 1 {
            a.to_vec()
        } else {
            let total: f64 = b.iter().sum();
            a.iter()
                .flat_map(|&ai| b.iter().map(move |&bj| ai * bj / total))
                .collect()
        };
        return Ok(finish(plan, m, n, c, 0, 0.0, true, reg, false));
    }

    let mut stages = Vec::new();
    let mut r = config.sinkhorn_start * cmax;
    while r > reg * (1.0 + 1e-9) {
        stages.push(r);
        r /= SCHEDULE_FACTOR;
    }
    stages.push(reg);

    let mut state = State::new(a, b, c);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for &stage_reg in &stages {
        let (it, res, ok) = state.run_stage(stage_reg, config.sinkhorn_max_iter, config.sinkhorn_tol)?;
        iterations += it;
        residual = res;
        converged = ok;
    }

    let plan = state.round(reg);
    if plan.iter().any(|p| !p.is_finite()) {
        return Err(Error::SinkhornUnderflow { reg });
    }
    let used_log = state.used_log;
    Ok(finish(plan, m, n, c, iterations, residual, converged, reg, used_log))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    plan: Vec<f64>,
    m: usize,
    n: usize,
    c: &[f64],
    iterations: usize,
    residual: f64,
    converged: bool,
    reg: f64,
    used_log_domain: bool,
) -> SinkhornOutcome {
    let cost = plan.iter().zip(c).map(|(p, c)| p * c).sum();
    SinkhornOutcome {
        plan: TransportPlan {
            rows: m,
            cols: n,
            plan,
            cost,
        },
        iterations,
        residual,
        converged,
        reg,
        used_log_domain,
    }
}

struct State<'a> {
    a: &'a [f64],
    b: &'a [f64],
    c: &'a [f64],
    m: usize,
    n: usize,
    f: Vec<f64>,
    g: Vec<f64>,
    kernel: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    used_log: bool,
}

impl<'a> State<'a> {
    fn new(a: &'a [f64], b: &'a [f64], c: &'a [f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        State {
            a,
            b,
            c,
            m,
            n,
            f: vec![0.0; m],
            g: vec![0.0; n],
            kernel: vec![0.0; m * n],
            u: vec![1.0; m],
            v: vec![1.0; n],
            used_log: false,
        }
    }

    /// Rebuilds the kernel from the potentials; false if a row or column
    /// underflows entirely.
    fn rebuild(&mut self, reg: f64) -> bool {
        let n = self.n;
        let mut col_alive = vec![false; n];
        let mut rows_ok = true;
        for i in 0..self.m {
            let fi = self.f[i];
            let row = &mut self.kernel[i * n..(i + 1) * n];
            let mut any = false;
            for j in 0..n {
                let k = ((fi + self.g[j] - self.c[i * n + j]) / reg).exp();
                row[j] = k;
                if k > 0.0 {
                    any = true;
                    col_alive[j] = true;
                }
            }
            rows_ok &= any;
        }
        self.u.fill(1.0);
        self.v.fill(1.0);
        rows_ok && col_alive.iter().all(|&x| x)
    }

    fn absorb(&mut self, reg: f64) {
        for (f, u) in self.f.iter_mut().zip(&self.u) {
            *f += reg * u.ln();
        }
        for (g, v) in self.g.iter_mut().zip(&self.v) {
            *g += reg * v.ln();
        }
    }

    fn run_stage(&mut self, reg: f64, max_iter: usize, tol: f64) -> Result<(usize, f64, bool)> {
        let (m, n) = (self.m, self.n);
        let mut log_domain = !self.rebuild(reg);
        let mut row_sums = vec![0.0; m];
        let mut col_sums = vec![0.0; n];
        for it in 0..max_iter {
            if log_domain {
                self.used_log = true;
                let res = self.log_step(reg);
                if !res.is_finite() {
                    return Err(Error::SinkhornUnderflow { reg });
                }
                if res < tol {
                    return Ok((it + 1, res, true));
                }
                continue;
            }

            // u-update, with the residual of the current plan on the way.
            let mut residual = 0.0;
            for i in 0..m {
                let row = &self.kernel[i * n..(i + 1) * n];
                let s: f64 = row.iter().zip(&self.v).map(|(k, v)| k * v).sum();
                row_sums[i] = s;
                residual += (self.u[i] * s - self.a[i]).abs();
            }
            if it > 0 && residual < tol {
                self.absorb(reg);
                self.u.fill(1.0);
                self.v.fill(1.0);
                return Ok((it, residual, true));
            }
            for i in 0..m {
                self.u[i] = self.a[i] / row_sums[i];
            }
            col_sums.fill(0.0);
            for i in 0..m {
                let ui = self.u[i];
                let row = &self.kernel[i * n..(i + 1) * n];
                for (cs, k) in col_sums.iter_mut().zip(row) {
                    *cs += k * ui;
                }
            }
            for j in 0..n {
                self.v[j] = self.b[j] / col_sums[j];
            }
            let out_of_range = self
                .u
                .iter()
                .chain(&self.v)
                .any(|&x| !(x > ABSORB_BELOW && x < ABSORB_ABOVE));
            if out_of_range {
                if self.u.iter().chain(&self.v).any(|x| !x.is_finite() || *x <= 0.0) {
                    // Scaling broke down: restart the stage from the last
                    // absorbed potentials in the log domain.
                    self.u.fill(1.0);
                    self.v.fill(1.0);
                    log_domain = true;
                    continue;
                }
                self.absorb(reg);
                log_domain = !self.rebuild(reg);
            }
        }
        if !log_domain {
            self.absorb(reg);
            self.u.fill(1.0);
            self.v.fill(1.0);
        }
        let res = self.row_residual(reg);
        Ok((max_iter, res, res < tol))
    }

    /// One pair of log-sum-exp updates; returns the row residual of the
    /// plan before the update.
    fn log_step(&mut self, reg: f64) -> f64 {
        let (m, n) = (self.m, self.n);
        let mut residual = 0.0;
        let mut buf = vec![0.0; m.max(n)];
        for i in 0..m {
            for j in 0..n {
                buf[j] = (self.f[i] + self.g[j] - self.c[i * n + j]) / reg;
            }
            let lse = logsumexp(&buf[..n]);
            residual += (lse.exp() - self.a[i]).abs();
            self.f[i] += reg * (self.a[i].ln() - lse);
        }
        for j in 0..n {
            for i in 0..m {
                buf[i] = (self.f[i] + self.g[j] - self.c[i * n + j]) / reg;
            }
            let lse = logsumexp(&buf[..m]);
            self.g[j] += reg * (self.b[j].ln() - lse);
        }
        residual
    }

    fn row_residual(&self, reg: f64) -> f64 {
        let n = self.n;
        (0..self.m)
            .map(|i| {
                let s: f64 = (0..n)
                    .map(|j| ((self.f[i] + self.g[j] - self.c[i * n + j]) / reg).exp())
                    .sum();
                (s - self.a[i]).abs()
            })
            .sum()
    }

    /// Plan from the potentials, projected onto the exact marginals.
    fn round(&self, reg: f64) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut p = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                p[i * n + j] = ((self.f[i] + self.g[j] - self.c[i * n + j]) / reg).exp();
            }
        }
        for i in 0..m {
            let row = &mut p[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            if s > self.a[i] {
                let x = self.a[i] / s;
                row.iter_mut().for_each(|v| *v *= x);
            }
        }
        let mut cols = vec![0.0; n];
        for row in p.chunks(n) {
            for (c, v) in cols.iter_mut().zip(row) {
                *c += v;
            }
        }
        for j in 0..n {
            if cols[j] > self.b[j] {
                let y = self.b[j] / cols[j];
                for i in 0..m {
                    p[i * n + j] *= y;
                }
            }
        }
        let mut err_r = vec![0.0; m];
        let mut err_c = self.b.to_vec();
        for i in 0..m {
            let row = &p[i * n..(i + 1) * n];
            err_r[i] = (self.a[i] - row.iter().sum::<f64>()).max(0.0);
            for (e, v) in err_c.iter_mut().zip(row) {
                *e -= v;
            }
        }
        err_c.iter_mut().for_each(|e| *e = e.max(0.0));
        let total: f64 = err_r.iter().sum();
        if total > 0.0 {
            for i in 0..m {
                for j in 0..n {
                    p[i * n + j] += err_r[i] * err_c[j] / total;
                }
            }
        }
        p
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::wasserstein_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (LocalizedMeasure, LocalizedMeasure, GroundCost) {
        let pts: Vec<[f64; 2]> = (0..m + n).map(|_| [rng.gen(), rng.gen()]).collect();
        let mut data = Vec::new();
        for i in 0..m {
            for j in 0..n {
                let (p, q) = (pts[i], pts[m + j]);
                data.push(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        let wa: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let wb: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        (
            LocalizedMeasure::from_weights((0..m).collect(), wa).unwrap(),
            LocalizedMeasure::from_weights((0..n).collect(), wb).unwrap(),
            GroundCost::new(m, n, data).unwrap(),
        )
    }

    #[test]
    fn forced_single_cell() {
        let g = GroundCost::new(1, 1, vec![3.0]).unwrap();
        let d = LocalizedMeasure::dirac(0);
        let p = wasserstein_sinkhorn(&d, &d, &g, &SolverConfig::sinkhorn()).unwrap();
        assert!((p.cost - 3.0).abs() < 1e-9);
    }

    #[test]
    fn identical_measures_are_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mu, _, _) = random_instance(&mut rng, 8, 1);
        // Same support on both sides: ground is the support's own distances.
        let pts: Vec<f64> = (0..8).map(|i| i as f64 * 0.37).collect();
        let data: Vec<f64> = (0..64).map(|k| (pts[k / 8] - pts[k % 8]).abs()).collect();
        let g = GroundCost::new(8, 8, data).unwrap();
        let cfg = SolverConfig::sinkhorn();
        let p = wasserstein_sinkhorn(&mu, &mu, &g, &cfg).unwrap();
        let reg = crate::ot::DEFAULT_SINKHORN_REG * g.max_entry();
        assert!(p.cost <= reg * (8f64).ln() + 1e-6, "{}", p.cost);
    }

    #[test]
    fn plan_marginals_are_exact_after_rounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (m, n) = (rng.gen_range(2..15), rng.gen_range(2..15));
            let (mu, nu, g) = random_instance(&mut rng, m, n);
            let p = wasserstein_sinkhorn(&mu, &nu, &g, &SolverConfig::sinkhorn()).unwrap();
            assert!(p.marginal_error(mu.mass(), nu.mass()) < 1e-9);
            assert!((p.evaluate(&g) - p.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_approaches_exact_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (mu, nu, g) = random_instance(&mut rng, 10, 10);
            let exact = wasserstein_exact(&mu, &nu, &g).unwrap().cost;
            let mut prev_err = f64::INFINITY;
            for rel in [0.1, 0.03, 0.01, 0.003, 0.001] {
                let cfg = SolverConfig {
                    sinkhorn_reg: Some(rel * g.max_entry()),
                    ..SolverConfig::sinkhorn()
                };
                let cost = wasserstein_sinkhorn(&mu, &nu, &g, &cfg).unwrap().cost;
                let err = (cost - exact).abs();
                assert!(err <= prev_err + 1e-9, "error grew at reg {rel}: {err} > {prev_err}");
                prev_err = err;
            }
            assert!(prev_err / exact <= 1e-3, "relative error {}", prev_err / exact);
        }
    }

    #[test]
    fn tiny_regularization_uses_log_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mu, nu, g) = random_instance(&mut rng, 6, 7);
        let cfg = SolverConfig {
            sinkhorn_reg: Some(1e-5 * g.max_entry()),
            sinkhorn_max_iter: 2000,
            ..SolverConfig::sinkhorn()
        };
        let out = sinkhorn_with_report(mu.mass(), nu.mass(), &g, &cfg).unwrap();
        let exact = wasserstein_exact(&mu, &nu, &g).unwrap().cost;
        assert!((out.plan.cost - exact).abs() / exact < 1e-2);
    }
}
