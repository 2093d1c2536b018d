//! Discrete weak-KAM machinery: lifted edge graphs on the torus grid,
//! one-step action costs, the Lax-Oleinik operator, critical values,
//! Peierls barrier diagonals, Aubry set estimates and minimizer velocities.

use alloc::vec;
use alloc::vec::Vec;

use crate::lagrangian::{LagrangianSpec, OneFormSpec};
use crate::{norm, Point};

/// Regular grid with N nodes per axis on the torus, spacing 1/N.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceGrid {
    pub dim: usize,
    pub n: usize,
}

impl SpaceGrid {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2);
        assert!(n >= 8);
        SpaceGrid { dim, n }
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Row-major node coordinates in [0, 1)^d.
    pub fn coords(&self, idx: usize) -> Point {
        let d = self.delta();
        if self.dim == 1 {
            [idx as f64 * d, 0.0]
        } else {
            [(idx / self.n) as f64 * d, (idx % self.n) as f64 * d]
        }
    }

    fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }

    pub fn index(&self, i: i64, j: i64) -> usize {
        if self.dim == 1 {
            self.wrap(i)
        } else {
            self.wrap(i) * self.n + self.wrap(j)
        }
    }
}

/// One admissible step: a lifted grid segment of duration tau.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LiftedEdge {
    pub source: usize,
    pub target: usize,
    /// Winding of the lifted segment; displacement = target + lift - source.
    pub lift: [i32; 2],
    pub disp: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionError {
    /// R*tau < grid spacing: not even nearest neighbors are reachable.
    CapTooSmall { cap_tau: f64, delta: f64 },
}

impl core::fmt::Display for ActionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ActionError::CapTooSmall { cap_tau, delta } => write!(
                f,
                "velocity cap times tau ({cap_tau}) is below the grid spacing ({delta})"
            ),
        }
    }
}

/// All ordered node pairs connected by a step of length at most cap*tau,
/// self-loops included. Sorted by (source, target, lift) for deterministic
/// tie-breaking downstream.
pub fn build_edges(grid: &SpaceGrid, tau: f64, cap: f64) -> Result<Vec<LiftedEdge>, ActionError> {
    assert!(tau > 0.0 && cap > 0.0);
    let delta = grid.delta();
    let reach = cap * tau;
    if reach < delta {
        return Err(ActionError::CapTooSmall { cap_tau: reach, delta });
    }
    let max_off = libm::floor(reach / delta) as i64;
    assert!(
        (max_off as usize) < grid.n,
        "velocity cap spans the torus; reduce cap or tau"
    );
    let mut edges = Vec::new();
    let offsets: Vec<[i64; 2]> = if grid.dim == 1 {
        (-max_off..=max_off).map(|o| [o, 0]).collect()
    } else {
        let mut v = Vec::new();
        for a in -max_off..=max_off {
            for b in -max_off..=max_off {
                v.push([a, b]);
            }
        }
        v
    };
    for src in 0..grid.node_count() {
        let (si, sj) = if grid.dim == 1 {
            (src as i64, 0i64)
        } else {
            ((src / grid.n) as i64, (src % grid.n) as i64)
        };
        for off in &offsets {
            let disp = [off[0] as f64 * delta, off[1] as f64 * delta];
            if norm(&disp) > reach + 1e-12 {
                continue;
            }
            let (ti, tj) = (si + off[0], sj + off[1]);
            let target = grid.index(ti, tj);
            let lift = [
                (ti.rem_euclid(grid.n as i64) != ti) as i32 * ti.signum() as i32,
                (tj.rem_euclid(grid.n as i64) != tj) as i32 * tj.signum() as i32,
            ];
            edges.push(LiftedEdge { source: src, target, lift, disp });
        }
    }
    edges.sort_by(|a, b| {
        (a.source, a.target, a.lift).cmp(&(b.source, b.target, b.lift))
    });
    Ok(edges)
}

/// Simpson 3-point quadrature of the one-step action of L - omega along the
/// straight lifted segment.
pub fn edge_cost(l: &LagrangianSpec, omega: &OneFormSpec, grid: &SpaceGrid, e: &LiftedEdge, tau: f64) -> f64 {
    let x0 = grid.coords(e.source);
    let v = [e.disp[0] / tau, e.disp[1] / tau];
    let g = |s: f64| {
        let x = [x0[0] + v[0] * s, x0[1] + v[1] * s];
        l.eval(&x, &v) - omega.eval(&x, &v)
    };
    tau / 6.0 * (g(0.0) + 4.0 * g(0.5 * tau) + g(tau))
}

/// The edge graph with its costs and an incoming-edge index per node.
#[derive(Debug, Clone)]
pub struct EdgeCostMatrix {
    pub grid: SpaceGrid,
    pub tau: f64,
    pub edges: Vec<LiftedEdge>,
    pub costs: Vec<f64>,
    incoming: Vec<Vec<u32>>,
}

impl EdgeCostMatrix {
    pub fn build(
        l: &LagrangianSpec,
        omega: &OneFormSpec,
        grid: &SpaceGrid,
        tau: f64,
        cap: f64,
    ) -> Result<Self, ActionError> {
        let edges = build_edges(grid, tau, cap)?;
        let costs: Vec<f64> = edges.iter().map(|e| edge_cost(l, omega, grid, e, tau)).collect();
        let mut incoming = vec![Vec::new(); grid.node_count()];
        for (i, e) in edges.iter().enumerate() {
            incoming[e.target].push(i as u32);
        }
        Ok(EdgeCostMatrix { grid: *grid, tau, edges, costs, incoming })
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// One Lax-Oleinik step: (Tu)(y) = min over edges x -> y of u(x) + c(e).
    pub fn lax_oleinik(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; u.len()];
        for (y, inc) in self.incoming.iter().enumerate() {
            let mut best = f64::INFINITY;
            for &ei in inc {
                let e = &self.edges[ei as usize];
                let v = u[e.source] + self.costs[ei as usize];
                if v < best {
                    best = v;
                }
            }
            out[y] = best;
        }
        out
    }

    /// Exact minimum cycle mean of the edge costs (action per step), by
    /// Karp's recurrence with a virtual all-zeros source level.
    pub fn min_cycle_mean(&self) -> f64 {
        let n = self.node_count();
        // d[k][v], flattened; level 0 is all zeros.
        let mut d = vec![f64::INFINITY; (n + 1) * n];
        for v in 0..n {
            d[v] = 0.0;
        }
        for k in 0..n {
            let (lo, hi) = d.split_at_mut((k + 1) * n);
            let prev = &lo[k * n..];
            let cur = &mut hi[..n];
            cur.fill(f64::INFINITY);
            for (ei, e) in self.edges.iter().enumerate() {
                let cand = prev[e.source] + self.costs[ei];
                if cand < cur[e.target] {
                    cur[e.target] = cand;
                }
            }
        }
        let mut mu = f64::INFINITY;
        for v in 0..n {
            let dn = d[n * n + v];
            let mut worst = f64::NEG_INFINITY;
            for k in 0..n {
                let r = (dn - d[k * n + v]) / (n - k) as f64;
                if r > worst {
                    worst = r;
                }
            }
            if worst < mu {
                mu = worst;
            }
        }
        mu
    }
}

/// Converged (or best-effort) discrete weak-KAM pair (u, lambda).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeakKamSolution {
    pub u: Vec<f64>,
    pub lambda: f64,
    /// Sup-norm oscillation of Tu + lambda*tau - u at the last iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Critical value and a calibrated weak-KAM function.
///
/// lambda comes from the exact minimum cycle mean; u is then obtained by a
/// half-averaged fixed-point iteration of the calibrated operator, which
/// converges where the plain iteration can cycle through periodic regimes.
pub fn solve_critical(costs: &EdgeCostMatrix, tol: f64, max_iter: usize) -> WeakKamSolution {
    assert!(tol > 0.0);
    let lambda = -costs.min_cycle_mean() / costs.tau;
    let shift = lambda * costs.tau;
    let n = costs.node_count();
    let mut u = vec![0.0; n];
    let mut best_res = f64::INFINITY;
    let mut best_u = u.clone();
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=max_iter {
        iterations = it;
        let tu = costs.lax_oleinik(&u);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = tu[i] + shift - u[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let res = hi - lo;
        if res < best_res {
            best_res = res;
            best_u.copy_from_slice(&u);
        }
        if res <= tol * costs.tau {
            converged = true;
            break;
        }
        for i in 0..n {
            u[i] = 0.5 * (u[i] + tu[i] + shift);
        }
    }
    let mut u = if converged { u } else { best_u };
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in u.iter_mut() {
        *v -= min_u;
    }
    WeakKamSolution { u, lambda, residual: best_res, iterations, converged }
}

/// Dense min-plus matrix, row-major.
#[derive(Clone)]
struct MinPlus {
    n: usize,
    a: Vec<f64>,
}

impl MinPlus {
    fn from_costs(costs: &EdgeCostMatrix, shift: f64) -> Self {
        let n = costs.node_count();
        let mut a = vec![f64::INFINITY; n * n];
        for (ei, e) in costs.edges.iter().enumerate() {
            let v = costs.costs[ei] + shift;
            let slot = &mut a[e.source * n + e.target];
            if v < *slot {
                *slot = v;
            }
        }
        MinPlus { n, a }
    }

    fn mul(&self, rhs: &MinPlus) -> MinPlus {
        let n = self.n;
        let mut out = vec![f64::INFINITY; n * n];
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, &aik) in row.iter().enumerate() {
                if !aik.is_finite() {
                    continue;
                }
                let brow = &rhs.a[k * n..(k + 1) * n];
                for j in 0..n {
                    let c = aik + brow[j];
                    if c < orow[j] {
                        orow[j] = c;
                    }
                }
            }
        }
        MinPlus { n, a: out }
    }

    fn entrywise_min(&mut self, rhs: &MinPlus) {
        for (a, b) in self.a.iter_mut().zip(&rhs.a) {
            if *b < *a {
                *a = *b;
            }
        }
    }

    fn pow(&self, p: usize) -> MinPlus {
        assert!(p >= 1);
        let mut base = self.clone();
        let mut acc: Option<MinPlus> = None;
        let mut p = p;
        loop {
            if p & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            p >>= 1;
            if p == 0 {
                break;
            }
            base = base.mul(&base);
        }
        acc.unwrap()
    }

    /// min over n in [1, w] of A^n.
    fn prefix_min(&self, w: usize) -> MinPlus {
        assert!(w >= 1);
        if w == 1 {
            return self.clone();
        }
        let half = self.prefix_min(w / 2);
        let mut out = half.clone();
        out.entrywise_min(&self.pow(w / 2).mul(&half));
        if w % 2 == 1 {
            let mut with_one = self.mul(&out);
            with_one.entrywise_min(self);
            out = with_one;
        }
        out
    }
}

/// Diagonal of the windowed Peierls barrier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeierlsDiag {
    pub values: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    /// Set when n_min is below the torus diameter in steps.
    pub window_warning: bool,
}

/// min over n in [n_min, n_max] of the n-step calibrated action x -> x,
/// with per-step calibration cost + lambda*tau.
pub fn peierls_diag(
    costs: &EdgeCostMatrix,
    lambda: f64,
    n_min: usize,
    n_max: usize,
) -> PeierlsDiag {
    assert!(1 <= n_min && n_min <= n_max);
    let a = MinPlus::from_costs(costs, lambda * costs.tau);
    let q = a.pow(n_min);
    let mut w = q.clone();
    if n_max > n_min {
        w.entrywise_min(&q.mul(&a.prefix_min(n_max - n_min)));
    }
    let reach = costs.edges.iter().map(|e| norm(&e.disp)).fold(0.0, f64::max);
    let diameter_steps =
        libm::ceil(0.5 * libm::sqrt(costs.grid.dim as f64) / reach) as usize;
    let n = costs.node_count();
    PeierlsDiag {
        values: (0..n).map(|i| w.a[i * n + i]).collect(),
        n_min,
        n_max,
        window_warning: n_min < diameter_steps,
    }
}

/// Nodes whose diagonal barrier is below the threshold.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AubrySetEstimate {
    pub nodes: Vec<usize>,
    pub tol: f64,
    pub n_min: usize,
    pub n_max: usize,
}

pub fn aubry_set(h_diag: &PeierlsDiag, tol_a: f64) -> AubrySetEstimate {
    AubrySetEstimate {
        nodes: (0..h_diag.values.len()).filter(|&i| h_diag.values[i] <= tol_a).collect(),
        tol: tol_a,
        n_min: h_diag.n_min,
        n_max: h_diag.n_max,
    }
}

/// Default Aubry threshold: the diagonal barrier of a true Aubry point is
/// O(delta + tau) by scheme consistency.
pub fn default_tol_a(delta: f64, tau: f64) -> f64 {
    5.0 * (delta + tau)
}

/// Velocities of all incoming edges attaining the Lax-Oleinik minimum at x
/// within an absolute 1e-9 window, deduplicated.
pub fn minimizer_velocity(sol: &WeakKamSolution, costs: &EdgeCostMatrix, x: usize) -> Vec<Point> {
    let mut best = f64::INFINITY;
    for &ei in &costs.incoming[x] {
        let e = &costs.edges[ei as usize];
        let v = sol.u[e.source] + costs.costs[ei as usize];
        if v < best {
            best = v;
        }
    }
    let mut out: Vec<Point> = Vec::new();
    for &ei in &costs.incoming[x] {
        let e = &costs.edges[ei as usize];
        if sol.u[e.source] + costs.costs[ei as usize] <= best + 1e-9 {
            let vel = [e.disp[0] / costs.tau, e.disp[1] / costs.tau];
            if !out.iter().any(|w| (w[0] - vel[0]).abs() < 1e-12 && (w[1] - vel[1]).abs() < 1e-12)
            {
                out.push(vel);
            }
        }
    }
    out
}
