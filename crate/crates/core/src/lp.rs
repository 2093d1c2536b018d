//! Dense revised simplex with sparse columns: two phases, Dantzig pricing
//! with a Bland fallback on stalls, periodic basis refactorization.
//! Deterministic: fixed scan order, smallest-index tie-breaking.

use alloc::vec;
use alloc::vec::Vec;

/// One structural column of an equality-form LP, row-sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCol {
    pub entries: Vec<(u32, f64)>,
    pub cost: f64,
}

/// min c'x subject to Ax = b, x >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub m: usize,
    pub cols: Vec<SparseCol>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    Infeasible { phase1_objective: f64 },
    IterationLimit,
    SingularBasis,
}

impl core::fmt::Display for LpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LpError::Infeasible { phase1_objective } => {
                write!(f, "infeasible (phase-1 residual {phase1_objective})")
            }
            LpError::IterationLimit => write!(f, "simplex iteration limit reached"),
            LpError::SingularBasis => write!(f, "basis matrix is numerically singular"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals from the optimal basis.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Iterations spent in phase 1 (included in `iterations`).
    pub phase1_iterations: usize,
    /// Optimal basis, one column index per row; seed for warm restarts.
    pub basis: Vec<usize>,
}

const ENTER_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 128;
const STALL_LIMIT: usize = 100;
const PERTURB: f64 = 1e-8;

/// Deterministic pseudo-random perturbation for row or column `i`.
/// Varied multipliers keep degenerate ratio-test ties from re-aligning.
fn perturbation(i: usize) -> f64 {
    let h = (i as u64).wrapping_mul(2654435761).wrapping_add(97) % 1024;
    PERTURB * (1.0 + h as f64 / 1024.0)
}

struct Tableau<'a> {
    lp: &'a LpProblem,
    /// Right-hand side with rows flipped to be nonnegative.
    b: Vec<f64>,
    row_sign: Vec<f64>,
    /// basis[i] < n_struct is structural, otherwise artificial for row i.
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LpProblem, perturb: bool) -> Self {
        let m = lp.m;
        let mut b = lp.b.clone();
        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                b[i] = -b[i];
                row_sign[i] = -1.0;
            }
            // Deterministic perturbation against degenerate stalling; the
            // exact right-hand side is restored before solution extraction.
            if perturb {
                b[i] += perturbation(i);
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Tableau {
            lp,
            xb: b.clone(),
            b,
            row_sign,
            basis: (0..m).map(|i| lp.cols.len() + i).collect(),
            binv,
            pivots_since_refactor: 0,
            iterations: 0,
        }
    }

    fn n_struct(&self) -> usize {
        self.lp.cols.len()
    }

    /// d = B^-1 a_j for a structural or artificial column.
    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.lp.m;
        out.fill(0.0);
        if j < self.n_struct() {
            for &(row, val) in &self.lp.cols[j].entries {
                let v = val * self.row_sign[row as usize];
                for i in 0..m {
                    out[i] += self.binv[i * m + row as usize] * v;
                }
            }
        } else {
            let row = j - self.n_struct();
            for i in 0..m {
                out[i] = self.binv[i * m + row];
            }
        }
    }

    /// Single component of B^-1 a_j, for artificial pivot-out scans.
    fn ftran_row(&self, j: usize, i: usize) -> f64 {
        let m = self.lp.m;
        if j < self.n_struct() {
            let mut acc = 0.0;
            for &(row, val) in &self.lp.cols[j].entries {
                acc += self.binv[i * m + row as usize] * val * self.row_sign[row as usize];
            }
            acc
        } else {
            self.binv[i * m + (j - self.n_struct())]
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: f64) -> f64 {
        let mut acc = cost;
        if j < self.n_struct() {
            for &(row, val) in &self.lp.cols[j].entries {
                acc -= y[row as usize] * val * self.row_sign[row as usize];
            }
        } else {
            acc -= y[j - self.n_struct()];
        }
        acc
    }

    fn duals(&self, cost_of: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.lp.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost_of(self.basis[i]);
            if cb != 0.0 {
                for j in 0..m {
                    y[j] += cb * self.binv[i * m + j];
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.lp.m;
        let mut mat = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n_struct() {
                for &(row, val) in &self.lp.cols[j].entries {
                    mat[row as usize * m + i] = val * self.row_sign[row as usize];
                }
            } else {
                mat[(j - self.n_struct()) * m + i] = 1.0;
            }
        }
        // Gauss-Jordan with partial pivoting into an identity-augmented inverse.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = mat[col * m + col].abs();
            for r in (col + 1)..m {
                let v = mat[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LpError::SingularBasis);
            }
            if piv != col {
                for k in 0..m {
                    mat.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let d = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        mat[r * m + k] -= f * mat[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        // xb = B^-1 b.
        let m2 = m;
        for i in 0..m2 {
            let mut acc = 0.0;
            for k in 0..m2 {
                acc += self.binv[i * m2 + k] * self.b[k];
            }
            self.xb[i] = acc;
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, enter: usize, leave_row: usize, d: &[f64]) -> Result<(), LpError> {
        let m = self.lp.m;
        let piv = d[leave_row];
        let step = self.xb[leave_row] / piv;
        for i in 0..m {
            self.xb[i] -= step * d[i];
        }
        self.xb[leave_row] = step;
        self.basis[leave_row] = enter;
        // Eta update of B^-1.
        for k in 0..m {
            self.binv[leave_row * m + k] /= piv;
        }
        for i in 0..m {
            if i == leave_row {
                continue;
            }
            let f = d[i];
            if f != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[leave_row * m + k];
                }
            }
        }
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Reduced costs of every structural column from scratch.
    fn price_all(&self, cost_of: &dyn Fn(usize) -> f64, y: &[f64], r: &mut [f64]) {
        for j in 0..self.n_struct() {
            r[j] = self.reduced_cost(j, y, cost_of(j));
        }
    }

    /// Run simplex until optimality for the given per-variable cost.
    /// `allow_enter` filters candidate entering variables.
    ///
    /// Pricing is Devex (reference-weight steepest edge approximation) with
    /// incrementally maintained reduced costs; both are rebuilt from exact
    /// duals at every refactorization. A Bland fallback handles objective
    /// stalls that survive the right-hand-side perturbation.
    fn optimize(
        &mut self,
        cost_of: &dyn Fn(usize) -> f64,
        allow_enter: &dyn Fn(usize) -> bool,
        max_iter: usize,
    ) -> Result<(), LpError> {
        let m = self.lp.m;
        let n = self.n_struct();
        let mut d = vec![0.0; m];
        let mut alpha_row = vec![0.0; m];
        let mut bland = false;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        let mut basic = vec![false; n + m];
        for &bj in &self.basis {
            basic[bj] = true;
        }
        let mut r = vec![0.0; n];
        let y = self.duals(cost_of);
        self.price_all(cost_of, &y, &mut r);
        let mut w = vec![1.0f64; n];
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit);
            }
            self.iterations += 1;
            let mut enter = usize::MAX;
            let mut best_score = 0.0f64;
            for j in 0..n {
                if basic[j] || !allow_enter(j) || r[j] >= -ENTER_TOL {
                    continue;
                }
                if bland {
                    enter = j;
                    break;
                }
                let score = r[j] * r[j] / w[j];
                if score > best_score {
                    best_score = score;
                    enter = j;
                }
            }
            if enter == usize::MAX {
                return Ok(());
            }
            let r_enter = r[enter];
            self.ftran(enter, &mut d);
            let mut leave = usize::MAX;
            let mut ratio = f64::INFINITY;
            for i in 0..m {
                if d[i] > PIVOT_TOL {
                    let rr = self.xb[i].max(0.0) / d[i];
                    let better = rr < ratio - 1e-12
                        || (rr < ratio + 1e-12
                            && (leave == usize::MAX || self.basis[i] < self.basis[leave]));
                    if better {
                        ratio = rr;
                        leave = i;
                    }
                }
            }
            if leave == usize::MAX {
                // Unbounded direction; cannot occur for the bounded problems
                // built here, treat as numerical failure.
                return Err(LpError::SingularBasis);
            }
            let leave_var = self.basis[leave];
            let piv = d[leave];
            // Pre-pivot row `leave` of B^-1, for the alpha products driving
            // the reduced-cost and Devex weight updates.
            alpha_row.copy_from_slice(&self.binv[leave * m..leave * m + m]);
            self.pivot(enter, leave, &d)?;
            basic[leave_var] = false;
            basic[enter] = true;
            if self.pivots_since_refactor == 0 {
                // Refactored: rebuild reduced costs from exact duals.
                let y = self.duals(cost_of);
                self.price_all(cost_of, &y, &mut r);
            } else {
                let w_enter = w[enter];
                let step = r_enter / piv;
                for j in 0..n {
                    if basic[j] || !allow_enter(j) {
                        continue;
                    }
                    let mut alpha = 0.0;
                    for &(row, val) in &self.lp.cols[j].entries {
                        alpha += alpha_row[row as usize] * val * self.row_sign[row as usize];
                    }
                    if alpha != 0.0 {
                        r[j] -= step * alpha;
                        let cand = (alpha / piv) * (alpha / piv) * w_enter;
                        if cand > w[j] {
                            w[j] = cand;
                        }
                    }
                }
                r[enter] = 0.0;
                if leave_var < n {
                    r[leave_var] = -step;
                    w[leave_var] = (w_enter / (piv * piv)).max(1.0);
                }
            }
            // Reset the reference framework when weights blow up.
            if w.iter().any(|&wj| wj > 1e8) {
                w.iter_mut().for_each(|wj| *wj = 1.0);
            }
            let obj: f64 = (0..m).map(|i| cost_of(self.basis[i]) * self.xb[i]).sum();
            if obj < last_obj - 1e-13 * (1.0 + last_obj.abs()) {
                last_obj = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }

    /// Dual simplex: restore primal feasibility of a dual-feasible basis
    /// after a right-hand-side change. Fails fast so callers can fall back
    /// to a cold solve.
    fn dual_optimize(
        &mut self,
        cost_of: &dyn Fn(usize) -> f64,
        allow_enter: &dyn Fn(usize) -> bool,
        max_iter: usize,
    ) -> Result<(), LpError> {
        let m = self.lp.m;
        let n = self.n_struct();
        let mut d = vec![0.0; m];
        let mut alpha_row = vec![0.0; m];
        let mut basic = vec![false; n + m];
        for &bj in &self.basis {
            basic[bj] = true;
        }
        let mut r = vec![0.0; n];
        let y = self.duals(cost_of);
        self.price_all(cost_of, &y, &mut r);
        // The warm basis must be dual feasible for this cost; if not the
        // caller's premise is wrong and a cold solve is cheaper than risk.
        for j in 0..n {
            if !basic[j] && allow_enter(j) && r[j] < -1e-6 {
                return Err(LpError::SingularBasis);
            }
        }
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit);
            }
            let mut leave = usize::MAX;
            let mut worst = -1e-9;
            for i in 0..m {
                if self.xb[i] < worst {
                    worst = self.xb[i];
                    leave = i;
                }
            }
            if leave == usize::MAX {
                return Ok(());
            }
            self.iterations += 1;
            alpha_row.copy_from_slice(&self.binv[leave * m..leave * m + m]);
            // Ratio test over columns that can absorb the negative basic
            // value while keeping reduced costs nonnegative.
            let mut enter = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            for j in 0..n {
                if basic[j] || !allow_enter(j) {
                    continue;
                }
                let mut alpha = 0.0;
                for &(row, val) in &self.lp.cols[j].entries {
                    alpha += alpha_row[row as usize] * val * self.row_sign[row as usize];
                }
                if alpha < -PIVOT_TOL {
                    let ratio = r[j].max(0.0) / -alpha;
                    if ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12 && (enter == usize::MAX || j < enter))
                    {
                        best_ratio = ratio;
                        enter = j;
                    }
                }
            }
            if enter == usize::MAX {
                // No column can fix this row: primal infeasible from here.
                return Err(LpError::Infeasible { phase1_objective: -worst });
            }
            let leave_var = self.basis[leave];
            self.ftran(enter, &mut d);
            let piv = d[leave];
            if piv.abs() < PIVOT_TOL {
                return Err(LpError::SingularBasis);
            }
            let step = r[enter].max(0.0) / piv;
            self.pivot(enter, leave, &d)?;
            basic[leave_var] = false;
            basic[enter] = true;
            if self.pivots_since_refactor == 0 {
                let y = self.duals(cost_of);
                self.price_all(cost_of, &y, &mut r);
            } else {
                for j in 0..n {
                    if basic[j] || !allow_enter(j) {
                        continue;
                    }
                    let mut alpha = 0.0;
                    for &(row, val) in &self.lp.cols[j].entries {
                        alpha += alpha_row[row as usize] * val * self.row_sign[row as usize];
                    }
                    if alpha != 0.0 {
                        r[j] -= step * alpha;
                    }
                }
                r[enter] = 0.0;
                if leave_var < n {
                    r[leave_var] = -step;
                }
            }
        }
    }
}

/// Two-phase solve without the anti-degeneracy perturbation.
pub fn solve_exact(lp: &LpProblem, max_iter: usize) -> Result<LpSolution, LpError> {
    solve_inner(lp, max_iter, false)
}

/// Two-phase solve. Deterministic for a fixed problem.
pub fn solve(lp: &LpProblem, max_iter: usize) -> Result<LpSolution, LpError> {
    match solve_inner(lp, max_iter, true) {
        // Rotation targets on the reachability boundary leave no room for
        // the perturbation; those instances re-solve exactly.
        Err(LpError::Infeasible { phase1_objective }) if phase1_objective < 1e-4 => {
            solve_inner(lp, max_iter, false)
        }
        other => other,
    }
}

fn solve_inner(lp: &LpProblem, max_iter: usize, perturb: bool) -> Result<LpSolution, LpError> {
    assert_eq!(lp.b.len(), lp.m);
    let n = lp.cols.len();
    let mut t = Tableau::new(lp, perturb);

    // Phase 1: drive out the artificial start basis.
    let phase1 = move |j: usize| if j < n { 0.0 } else { 1.0 };
    t.optimize(&phase1, &|_| true, max_iter)?;
    let phase1_iterations = t.iterations;
    let p1: f64 = (0..lp.m).map(|i| phase1(t.basis[i]) * t.xb[i]).sum();
    if p1 > FEAS_TOL {
        return Err(LpError::Infeasible { phase1_objective: p1 });
    }
    // Degenerate artificials: pivot out where a structural column can take
    // over the row; rows with no candidate are redundant and keep their
    // artificial at level zero.
    let mut basic = vec![false; n];
    for &bj in &t.basis {
        if bj < n {
            basic[bj] = true;
        }
    }
    let mut d = vec![0.0; lp.m];
    for i in 0..lp.m {
        if t.basis[i] < n {
            continue;
        }
        for j in 0..n {
            if basic[j] {
                continue;
            }
            if t.ftran_row(j, i).abs() > 1e-7 {
                t.ftran(j, &mut d);
                t.pivot(j, i, &d)?;
                basic[j] = true;
                break;
            }
        }
    }

    // Phase 2 over structural costs; artificials may not re-enter.
    let phase2 = move |j: usize| if j < n { lp.cols[j].cost } else { 0.0 };
    t.optimize(&phase2, &|j| j < n, max_iter)?;

    extract(t, lp, perturb, phase1_iterations)
}

/// Re-solve after a right-hand-side or cost change, starting from a basis
/// of a related solved problem. Falls back to the cold two-phase solve when
/// the basis does not transplant.
pub fn solve_with_basis(
    lp: &LpProblem,
    warm: &[usize],
    max_iter: usize,
) -> Result<LpSolution, LpError> {
    let n = lp.cols.len();
    let usable = warm.len() == lp.m && warm.iter().all(|&j| j < n + lp.m);
    if usable {
        match warm_inner(lp, warm, max_iter) {
            Ok(sol) => return Ok(sol),
            // Any trouble in the warm path, including genuine infeasibility,
            // defers to the cold solve for the authoritative answer.
            Err(_) => {}
        }
    }
    solve(lp, max_iter)
}

fn warm_inner(lp: &LpProblem, warm: &[usize], max_iter: usize) -> Result<LpSolution, LpError> {
    assert_eq!(lp.b.len(), lp.m);
    let n = lp.cols.len();
    let mut t = Tableau::new(lp, true);
    t.basis.copy_from_slice(warm);
    t.refactor()?;
    let phase2p = move |j: usize| if j < n { lp.cols[j].cost } else { 0.0 };
    // The transplanted basis stays dual feasible across a right-hand-side
    // change; dual simplex repairs the primal side, then the primal phase
    // mops up any cost drift.
    t.dual_optimize(&phase2p, &|j| j < n, max_iter)?;
    t.optimize(&phase2p, &|j| j < n, max_iter)?;
    // Artificial columns inherited from the donor basis must stay at zero;
    // a positive level would silently absorb part of the new right side.
    let art_level: f64 = (0..lp.m)
        .filter(|&i| t.basis[i] >= n)
        .map(|i| t.xb[i].abs())
        .sum();
    if art_level > FEAS_TOL {
        return Err(LpError::Infeasible { phase1_objective: art_level });
    }
    extract(t, lp, true, 0)
}

/// Undo the perturbation, recompute the basis exactly, and read off the
/// primal point, objective, and duals.
fn extract(
    mut t: Tableau<'_>,
    lp: &LpProblem,
    perturb: bool,
    phase1_iterations: usize,
) -> Result<LpSolution, LpError> {
    let n = lp.cols.len();
    if perturb {
        for i in 0..lp.m {
            t.b[i] -= perturbation(i);
        }
        t.refactor()?;
    }

    let mut x = vec![0.0; n];
    for i in 0..lp.m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.xb[i].max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.cols).map(|(xi, c)| xi * c.cost).sum();
    let phase2 = move |j: usize| if j < n { lp.cols[j].cost } else { 0.0 };
    let mut duals = t.duals(&phase2);
    for i in 0..lp.m {
        duals[i] *= t.row_sign[i];
    }
    Ok(LpSolution {
        x,
        objective,
        duals,
        iterations: t.iterations,
        phase1_iterations,
        basis: t.basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(entries: &[(u32, f64)], cost: f64) -> SparseCol {
        SparseCol { entries: entries.to_vec(), cost }
    }

    #[test]
    fn simple_bounded_min() {
        // min -x1 - 2 x2 s.t. x1 + x2 + s = 1.
        let lp = LpProblem {
            m: 1,
            cols: alloc::vec![
                col(&[(0, 1.0)], -1.0),
                col(&[(0, 1.0)], -2.0),
                col(&[(0, 1.0)], 0.0),
            ],
            b: alloc::vec![1.0],
        };
        let s = solve(&lp, 1000).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!((s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_with_negative_rhs() {
        // min x1 + x2 s.t. x1 - x2 = -3, x1 + x2 = 5 -> x = (1, 4).
        let lp = LpProblem {
            m: 2,
            cols: alloc::vec![
                col(&[(0, 1.0), (1, 1.0)], 1.0),
                col(&[(0, -1.0), (1, 1.0)], 1.0),
            ],
            b: alloc::vec![-3.0, 5.0],
        };
        let s = solve(&lp, 1000).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 4.0).abs() < 1e-9);
        assert!((s.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x1 = 1 and x1 = 2 cannot both hold.
        let lp = LpProblem {
            m: 2,
            cols: alloc::vec![col(&[(0, 1.0), (1, 1.0)], 0.0)],
            b: alloc::vec![1.0, 2.0],
        };
        assert!(matches!(solve(&lp, 1000), Err(LpError::Infeasible { .. })));
    }

    #[test]
    fn redundant_row_tolerated() {
        // Second row duplicates the first.
        let lp = LpProblem {
            m: 2,
            cols: alloc::vec![
                col(&[(0, 1.0), (1, 1.0)], 2.0),
                col(&[(0, 1.0), (1, 1.0)], 1.0),
            ],
            b: alloc::vec![1.0, 1.0],
        };
        let s = solve(&lp, 1000).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!((s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transportation_instance() {
        // 2 sources (supply 3, 2), 2 sinks (demand 2, 3), costs [[1,4],[2,1]].
        // Optimum ships 2 from s0 to t0, 1 from s0 to t1, 2 from s1 to t1: 8.
        // Rows: supply s0, supply s1, demand t0, demand t1 (one redundant).
        let lp = LpProblem {
            m: 4,
            cols: alloc::vec![
                col(&[(0, 1.0), (2, 1.0)], 1.0),
                col(&[(0, 1.0), (3, 1.0)], 4.0),
                col(&[(1, 1.0), (2, 1.0)], 2.0),
                col(&[(1, 1.0), (3, 1.0)], 1.0),
            ],
            b: alloc::vec![3.0, 2.0, 2.0, 3.0],
        };
        let s = solve(&lp, 1000).unwrap();
        assert!((s.objective - 8.0).abs() < 1e-9, "objective {}", s.objective);
        // Primal feasibility.
        for (i, &bi) in lp.b.iter().enumerate() {
            let lhs: f64 = lp
                .cols
                .iter()
                .zip(&s.x)
                .map(|(c, x)| {
                    c.entries.iter().filter(|(r, _)| *r as usize == i).map(|(_, v)| v * x).sum::<f64>()
                })
                .sum();
            assert!((lhs - bi).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_feasibility_and_complementarity() {
        let lp = LpProblem {
            m: 2,
            cols: alloc::vec![
                col(&[(0, 1.0), (1, 2.0)], 3.0),
                col(&[(0, 2.0), (1, 1.0)], 3.0),
                col(&[(0, 1.0)], 1.0),
                col(&[(1, 1.0)], 1.0),
            ],
            b: alloc::vec![4.0, 4.0],
        };
        let s = solve(&lp, 1000).unwrap();
        for (j, c) in lp.cols.iter().enumerate() {
            let r = c.cost
                - c.entries.iter().map(|(row, v)| s.duals[*row as usize] * v).sum::<f64>();
            assert!(r > -1e-7, "dual infeasible at column {j}: {r}");
            if s.x[j] > 1e-9 {
                assert!(r.abs() < 1e-7, "complementarity broken at {j}");
            }
        }
    }

    #[test]
    fn deterministic_repeat() {
        let lp = LpProblem {
            m: 3,
            cols: (0u32..12)
                .map(|j| {
                    col(
                        &[(0, 1.0), (1 + j % 2, (j * 7 % 5) as f64 - 2.0)],
                        ((j * 13 % 11) as f64 - 5.0) / 3.0,
                    )
                })
                .collect(),
            b: alloc::vec![1.0, 0.0, 0.0],
        };
        let a = solve(&lp, 10000).unwrap();
        let b = solve(&lp, 10000).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
    }
}
