//! Self-contained linear-programming kernel with exact row duals, plus a
//! depth-first branch-and-bound solver for binary programs.
//!
//! The LP solver is a dense bounded-variable two-phase simplex with an
//! explicit basis inverse, periodic refactorization, row equilibration, and
//! Bland's rule as the anti-cycling fallback. Problem sizes here are small
//! (tens of rows, up to a few thousand columns), so dense linear algebra is
//! the simplest thing that works and keeps the duals accurate enough for
//! pricing and for the dual bounds used by the column-generation loop.

use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One dual per row, in row order, signed for the problem's sense.
    pub duals: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient: {0}")]
    NonFinite(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("variable {0} has no finite bound")]
    FreeVariable(usize),
}

pub const FEAS_TOL: f64 = 1e-7;
pub const INT_TOL: f64 = 1e-6;
const PIVOT_TOL: f64 = 1e-9;
const RC_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> LinearProgram {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "bounds length != {n} variables"
            )));
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("objective[{j}]")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs[{i}]")));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Dimension(format!("row {i} references var {j}")));
                }
                if !v.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}, var {j}")));
                }
            }
        }
        for j in 0..n {
            if self.lower[j].is_infinite() && self.upper[j].is_infinite() {
                return Err(LpError::FreeVariable(j));
            }
            if self.lower[j] > self.upper[j] + FEAS_TOL {
                return Err(LpError::Dimension(format!("lower > upper for var {j}")));
            }
        }
        Ok(())
    }

    /// Residual `a'x - b` per row; useful for feasibility checks.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.coeffs.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - row.rhs)
            .collect()
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        for (j, &xj) in x.iter().enumerate() {
            if xj < self.lower[j] - tol || xj > self.upper[j] + tol {
                return false;
            }
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let scale = 1.0 + row.rhs.abs();
            let ok = match row.relation {
                Relation::Le => act <= row.rhs + tol * scale,
                Relation::Ge => act >= row.rhs - tol * scale,
                Relation::Eq => (act - row.rhs).abs() <= tol * scale,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_bounded(lp, &lp.lower, &lp.upper)
}

/// Solve with overriding variable bounds (used by branch-and-bound).
pub fn solve_lp_bounded(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if lower.len() != lp.num_vars() || upper.len() != lp.num_vars() {
        return Err(LpError::Dimension("bound override length".into()));
    }
    for j in 0..lp.num_vars() {
        if lower[j] > upper[j] + FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; lp.num_vars()],
                duals: vec![0.0; lp.rows.len()],
                objective: f64::INFINITY,
            });
        }
    }
    let mut solver = Simplex::build(lp, lower, upper)?;
    solver.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Simplex {
    sense: Sense,
    m: usize,
    nstruct: usize,
    ntotal: usize,
    /// Column-major scaled constraint matrix, structural + slack vars.
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,     // phase-2 cost (minimization form)
    orig_obj: Vec<f64>, // original objective for reporting
    lo: Vec<f64>,
    up: Vec<f64>,
    b: Vec<f64>, // scaled rhs
    row_scale: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>, // m*m row-major
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    bland: bool,
}

impl Simplex {
    fn build(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Result<Simplex, LpError> {
        let m = lp.rows.len();
        let nstruct = lp.num_vars();
        let ntotal = nstruct + m; // structural + one slack per row
        let mut row_scale = vec![1.0f64; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let mx = row
                .coeffs
                .iter()
                .map(|&(_, v)| v.abs())
                .fold(0.0f64, f64::max);
            if mx > 0.0 {
                row_scale[i] = 1.0 / mx;
            }
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ntotal];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    cols[j].push((i, v * row_scale[i]));
                }
            }
        }
        let mut lo = Vec::with_capacity(ntotal);
        let mut up = Vec::with_capacity(ntotal);
        lo.extend_from_slice(lower);
        up.extend_from_slice(upper);
        for (i, row) in lp.rows.iter().enumerate() {
            let j = nstruct + i;
            cols[j].push((i, 1.0));
            match row.relation {
                Relation::Le => {
                    lo.push(0.0);
                    up.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lo.push(f64::NEG_INFINITY);
                    up.push(0.0);
                }
                Relation::Eq => {
                    lo.push(0.0);
                    up.push(0.0);
                }
            }
        }
        let sign = match lp.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let mut cost = vec![0.0; ntotal];
        for j in 0..nstruct {
            cost[j] = sign * lp.objective[j];
        }
        let b: Vec<f64> = lp
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.rhs * row_scale[i])
            .collect();
        Ok(Simplex {
            sense: lp.sense,
            m,
            nstruct,
            ntotal,
            cols,
            cost,
            orig_obj: lp.objective.clone(),
            lo,
            up,
            b,
            row_scale,
            state: vec![VarState::AtLower; ntotal],
            basis: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            pivots_since_refactor: 0,
            iterations: 0,
            bland: false,
        })
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lo[j],
            VarState::AtUpper => self.up[j],
            VarState::Basic(k) => self.xb[k],
        }
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        // Every nonbasic variable sits at a finite bound.
        for j in 0..self.ntotal {
            self.state[j] = if self.lo[j].is_finite() {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
        }
        // Try slacks as the initial basis; rows whose slack value falls
        // outside its range get an artificial instead.
        let mut r = self.b.clone();
        for j in 0..self.nstruct {
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * v;
                }
            }
        }
        let mut artificial_rows = Vec::new();
        self.basis = vec![usize::MAX; self.m];
        for i in 0..self.m {
            let slack = self.nstruct + i;
            if r[i] >= self.lo[slack] - FEAS_TOL && r[i] <= self.up[slack] + FEAS_TOL {
                self.basis[i] = slack;
            } else {
                artificial_rows.push(i);
            }
        }
        for &i in &artificial_rows {
            let j = self.cols.len();
            let sgn = if r[i] >= 0.0 { 1.0 } else { -1.0 };
            self.cols.push(vec![(i, sgn)]);
            self.lo.push(0.0);
            self.up.push(f64::INFINITY);
            self.cost.push(0.0);
            self.state.push(VarState::AtLower);
            self.basis[i] = j;
        }
        self.ntotal = self.cols.len();
        let mut art_cost = vec![0.0; self.ntotal];
        for c in art_cost.iter_mut().skip(self.nstruct + self.m) {
            *c = 1.0;
        }
        for (i, &bj) in self.basis.iter().enumerate() {
            self.state[bj] = VarState::Basic(i);
        }
        self.refactor()?;

        if !artificial_rows.is_empty() {
            let p1 = self.optimize(&art_cost)?;
            if p1 == PhaseOutcome::Unbounded {
                return Err(LpError::Numerical("phase 1 unbounded".into()));
            }
            let infeas: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|&(_, &j)| j >= self.nstruct + self.m)
                .map(|(k, _)| self.xb[k].abs())
                .sum();
            if infeas > FEAS_TOL * (1.0 + self.b.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Ok(self.report(LpStatus::Infeasible));
            }
            // Pin artificials at zero and try to drive basic ones out.
            for j in self.nstruct + self.m..self.ntotal {
                self.up[j] = 0.0;
            }
            self.expel_artificials()?;
        }

        let cost = self.cost.clone();
        match self.optimize(&cost)? {
            PhaseOutcome::Optimal => Ok(self.report(LpStatus::Optimal)),
            PhaseOutcome::Unbounded => Ok(self.report(LpStatus::Unbounded)),
        }
    }

    fn expel_artificials(&mut self) -> Result<(), LpError> {
        for row in 0..self.m {
            let bj = self.basis[row];
            if bj < self.nstruct + self.m {
                continue;
            }
            // Find any eligible nonbasic column with a usable pivot in this row.
            let mut found = None;
            for j in 0..self.nstruct + self.m {
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                if self.lo[j] == self.up[j] {
                    continue;
                }
                let w = self.ftran_entry(j, row);
                if w.abs() > 1e-7 {
                    found = Some(j);
                    break;
                }
            }
            if let Some(j) = found {
                let w = self.ftran(j);
                self.pivot(j, row, &w, 0.0, 1.0)?;
            }
            // Redundant row: leave the artificial basic at zero.
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            self.binv = Vec::new();
            self.xb = Vec::new();
            return Ok(());
        }
        // Build the basis matrix and invert via Gauss-Jordan with partial
        // pivoting.
        let mut a = vec![0.0f64; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LpError::Numerical("singular basis".into()));
            }
            if piv != col {
                for c in 0..m {
                    a.swap(col * m + c, piv * m + c);
                    inv.swap(col * m + c, piv * m + c);
                }
            }
            let d = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        a[r * m + c] -= f * a[col * m + c];
                        inv[r * m + c] -= f * inv[col * m + c];
                    }
                }
            }
        }
        self.binv = inv;
        let r = self.residual_nonbasic();
        self.xb = self.apply_binv(&r);
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn residual_nonbasic(&self) -> Vec<f64> {
        let mut r = self.b.clone();
        for j in 0..self.ntotal {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * v;
                }
            }
        }
        r
    }

    fn apply_binv(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for k in 0..m {
                s += row[k] * v[k];
            }
            out[i] = s;
        }
        out
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for &(k, v) in &self.cols[j] {
                s += row[k] * v;
            }
            out[i] = s;
        }
        out
    }

    fn ftran_entry(&self, j: usize, row: usize) -> f64 {
        let m = self.m;
        let r = &self.binv[row * m..(row + 1) * m];
        let mut s = 0.0;
        for &(k, v) in &self.cols[j] {
            s += r[k] * v;
        }
        s
    }

    fn duals_for(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<PhaseOutcome, LpError> {
        let iter_cap = 20_000 + 200 * (self.m + self.ntotal);
        let bland_after = 2_000 + 20 * (self.m + self.ntotal);
        // Entering tolerance scales with the cost magnitude; with large
        // fixed-cost coefficients the dual noise would otherwise fabricate
        // everlasting "improving" candidates and stall the solve.
        let rc_tol = RC_TOL * cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let mut local_iters = 0usize;
        loop {
            local_iters += 1;
            self.iterations += 1;
            if local_iters > iter_cap {
                return Err(LpError::Numerical("iteration limit".into()));
            }
            if local_iters == bland_after {
                self.bland = true;
            }
            let y = self.duals_for(cost);
            // Pricing.
            let mut enter: Option<(usize, f64, f64)> = None; // (var, |rc|, direction)
            for j in 0..self.ntotal {
                match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ => {}
                }
                if self.lo[j] == self.up[j] {
                    continue;
                }
                let mut rc = cost[j];
                for &(i, v) in &self.cols[j] {
                    rc -= y[i] * v;
                }
                let dir = match self.state[j] {
                    VarState::AtLower if rc < -rc_tol => 1.0,
                    VarState::AtUpper if rc > rc_tol => -1.0,
                    _ => continue,
                };
                if self.bland {
                    enter = Some((j, rc.abs(), dir));
                    break;
                }
                match enter {
                    Some((_, best, _)) if rc.abs() <= best => {}
                    _ => enter = Some((j, rc.abs(), dir)),
                }
            }
            let Some((j, _, dir)) = enter else {
                return Ok(PhaseOutcome::Optimal);
            };
            let w = self.ftran(j);
            // Ratio test: entering moves by t >= 0 in direction `dir` until a
            // basic variable hits a bound or the entering variable flips.
            let flip_t = if self.lo[j].is_finite() && self.up[j].is_finite() {
                self.up[j] - self.lo[j]
            } else {
                f64::INFINITY
            };
            let mut min_ratio = f64::INFINITY;
            let mut leave: Option<(usize, f64, f64)> = None; // (row, hit bound, |pivot|)
            for k in 0..self.m {
                let wk = dir * w[k];
                let bj = self.basis[k];
                let (ratio, hit) = if wk > PIVOT_TOL {
                    if !self.lo[bj].is_finite() {
                        continue;
                    }
                    (((self.xb[k] - self.lo[bj]) / wk).max(0.0), self.lo[bj])
                } else if wk < -PIVOT_TOL {
                    if !self.up[bj].is_finite() {
                        continue;
                    }
                    (((self.up[bj] - self.xb[k]) / (-wk)).max(0.0), self.up[bj])
                } else {
                    continue;
                };
                let take = match leave {
                    None => true,
                    Some((lk, _, lpiv)) => {
                        if ratio < min_ratio - 1e-9 {
                            true
                        } else if ratio <= min_ratio + 1e-9 {
                            if self.bland {
                                self.basis[k] < self.basis[lk]
                            } else {
                                wk.abs() > lpiv
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    min_ratio = min_ratio.min(ratio);
                    leave = Some((k, hit, wk.abs()));
                }
            }
            if min_ratio >= flip_t {
                if flip_t.is_infinite() {
                    return Ok(PhaseOutcome::Unbounded);
                }
                // Bound flip: entering travels to its other bound.
                for k in 0..self.m {
                    self.xb[k] -= dir * flip_t * w[k];
                }
                self.state[j] = match self.state[j] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    VarState::Basic(_) => unreachable!(),
                };
            } else {
                let (k, hit, _) = leave.expect("finite ratio without leaving row");
                let t = min_ratio;
                let enter_val = self.nonbasic_value(j) + dir * t;
                self.pivot_with_value(j, k, &w, enter_val, hit, dir, t)?;
            }
        }
    }

    fn pivot(&mut self, j: usize, row: usize, w: &[f64], t: f64, dir: f64) -> Result<(), LpError> {
        let enter_val = self.nonbasic_value(j) + dir * t;
        let hit = self.xb[row]; // degenerate pivot keeps the value
        self.pivot_with_value(j, row, w, enter_val, hit, dir, t)
    }

    fn pivot_with_value(
        &mut self,
        j: usize,
        row: usize,
        w: &[f64],
        enter_val: f64,
        leave_val: f64,
        dir: f64,
        t: f64,
    ) -> Result<(), LpError> {
        let m = self.m;
        let piv = w[row];
        if piv.abs() < 1e-12 {
            return Err(LpError::Numerical("zero pivot".into()));
        }
        for k in 0..m {
            if k != row {
                self.xb[k] -= dir * t * w[k];
            }
        }
        let leaving = self.basis[row];
        self.state[leaving] = if self.lo[leaving].is_finite()
            && (leave_val - self.lo[leaving]).abs() <= (leave_val - self.up[leaving]).abs()
        {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        self.basis[row] = j;
        self.state[j] = VarState::Basic(row);
        self.xb[row] = enter_val;
        // Eta update of the inverse.
        let inv_piv = 1.0 / piv;
        for c in 0..m {
            self.binv[row * m + c] *= inv_piv;
        }
        for r in 0..m {
            if r == row {
                continue;
            }
            let f = w[r];
            if f != 0.0 {
                for c in 0..m {
                    self.binv[r * m + c] -= f * self.binv[row * m + c];
                }
            }
        }
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn report(&mut self, status: LpStatus) -> LpSolution {
        // One refinement pass before reporting keeps the objective sharp.
        if self.m > 0 && status == LpStatus::Optimal {
            if self.refactor().is_err() {
                // fall through with current values
            }
        }
        let mut x = vec![0.0; self.nstruct];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = self.nonbasic_value(j);
        }
        let cost = self.cost.clone();
        let mut y = self.duals_for(&cost);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi *= self.row_scale[i];
        }
        if self.sense == Sense::Max {
            for yi in y.iter_mut() {
                *yi = -*yi;
            }
        }
        let objective = match status {
            LpStatus::Optimal => self.orig_obj.iter().zip(&x).map(|(c, v)| c * v).sum(),
            LpStatus::Infeasible => match self.sense {
                Sense::Min => f64::INFINITY,
                Sense::Max => f64::NEG_INFINITY,
            },
            LpStatus::Unbounded => match self.sense {
                Sense::Min => f64::NEG_INFINITY,
                Sense::Max => f64::INFINITY,
            },
        };
        LpSolution {
            status,
            x,
            duals: y,
            objective,
        }
    }
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
enum PhaseOutcome {
    Optimal,
    Unbounded,
}

// --- Binary branch and bound ---

#[derive(Debug, Clone, Default)]
pub struct MipOptions {
    pub time_budget: Option<Duration>,
    pub warm_start: Option<Vec<f64>>,
    /// When true, any two distinct feasible objectives differ by >= 1, which
    /// sharpens pruning.
    pub integral_objective: bool,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Proven bound on the optimum (lower bound when minimizing).
    pub bound: f64,
    pub gap: f64,
    pub nodes: u64,
}

pub fn solve_binary_mip(
    lp: &LinearProgram,
    binaries: &[usize],
    opts: &MipOptions,
) -> Result<MipSolution, LpError> {
    lp.validate()?;
    let start = Instant::now();
    let minimize = lp.sense == Sense::Min;
    let worse = if minimize {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let better_than = |a: f64, b: f64| if minimize { a < b } else { a > b };

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = worse;
    if let Some(ws) = &opts.warm_start {
        if lp.is_feasible(ws, FEAS_TOL) && binaries.iter().all(|&j| is_binary(ws[j])) {
            inc_obj = lp.eval_objective(ws);
            incumbent = Some(ws.clone());
        }
    }

    struct Node {
        fixes: Vec<(usize, bool)>,
        parent_bound: f64,
    }
    let root_relax = solve_lp(lp)?;
    match root_relax.status {
        LpStatus::Infeasible => {
            return Ok(MipSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; lp.num_vars()],
                objective: worse,
                bound: worse,
                gap: f64::INFINITY,
                nodes: 0,
            });
        }
        LpStatus::Unbounded => {
            return Err(LpError::Numerical("relaxation unbounded".into()));
        }
        LpStatus::Optimal => {}
    }
    let root_bound = root_relax.objective;

    let mut stack = vec![Node {
        fixes: Vec::new(),
        parent_bound: root_bound,
    }];
    let mut nodes: u64 = 0;
    let mut exhausted = true;

    let prune_cut = |inc: f64| -> f64 {
        if inc == worse {
            return if minimize {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        if opts.integral_objective {
            if minimize {
                inc - 1.0 + 1e-6
            } else {
                inc + 1.0 - 1e-6
            }
        } else {
            let slack = 1e-9 * (1.0 + inc.abs());
            if minimize {
                inc - slack
            } else {
                inc + slack
            }
        }
    };

    while let Some(node) = stack.pop() {
        if let Some(budget) = opts.time_budget {
            if start.elapsed() >= budget {
                exhausted = false;
                stack.push(node);
                break;
            }
        }
        let cut = prune_cut(inc_obj);
        let worse_or_equal = |bound: f64| {
            if minimize {
                bound >= cut
            } else {
                bound <= cut
            }
        };
        if incumbent.is_some() && worse_or_equal(node.parent_bound) {
            continue;
        }
        nodes += 1;
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for &(j, v) in &node.fixes {
            let val = if v { 1.0 } else { 0.0 };
            lower[j] = val;
            upper[j] = val;
        }
        let sol = solve_lp_bounded(lp, &lower, &upper)?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if incumbent.is_some() && worse_or_equal(sol.objective) {
            continue;
        }
        // Most fractional binary.
        let mut branch_var = None;
        let mut best_frac = INT_TOL;
        for &j in binaries {
            let f = (sol.x[j] - sol.x[j].round()).abs();
            if f > best_frac {
                best_frac = f;
                branch_var = Some(j);
            }
        }
        match branch_var {
            None => {
                let mut x = sol.x.clone();
                for &j in binaries {
                    x[j] = x[j].round();
                }
                if lp.is_feasible(&x, FEAS_TOL * 10.0) {
                    let obj = lp.eval_objective(&x);
                    if incumbent.is_none() || better_than(obj, inc_obj) {
                        inc_obj = obj;
                        incumbent = Some(x);
                    }
                } else if incumbent.is_none() || better_than(sol.objective, inc_obj) {
                    inc_obj = sol.objective;
                    incumbent = Some(sol.x.clone());
                }
            }
            Some(j) => {
                let toward = sol.x[j] >= 0.5;
                let mut away_f = node.fixes.clone();
                away_f.push((j, !toward));
                let mut toward_f = node.fixes.clone();
                toward_f.push((j, toward));
                stack.push(Node {
                    fixes: away_f,
                    parent_bound: sol.objective,
                });
                stack.push(Node {
                    fixes: toward_f,
                    parent_bound: sol.objective,
                });
            }
        }
    }

    let open_bound = stack
        .iter()
        .map(|n| n.parent_bound)
        .fold(None, |acc: Option<f64>, b| {
            Some(match acc {
                None => b,
                Some(a) => {
                    if minimize {
                        a.min(b)
                    } else {
                        a.max(b)
                    }
                }
            })
        });
    let bound = if exhausted {
        match incumbent {
            Some(_) => inc_obj,
            None => worse,
        }
    } else {
        match open_bound {
            Some(b) => {
                if minimize {
                    b.min(inc_obj)
                } else {
                    b.max(inc_obj)
                }
            }
            None => root_bound,
        }
    };

    match incumbent {
        Some(x) => {
            let gap = if inc_obj == 0.0 {
                if (inc_obj - bound).abs() <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                ((inc_obj - bound) / inc_obj).abs()
            };
            Ok(MipSolution {
                status: LpStatus::Optimal,
                x,
                objective: inc_obj,
                bound,
                gap: if exhausted { 0.0 } else { gap },
                nodes,
            })
        }
        None => Ok(MipSolution {
            status: if exhausted {
                LpStatus::Infeasible
            } else {
                LpStatus::Optimal
            },
            x: vec![0.0; lp.num_vars()],
            objective: worse,
            bound,
            gap: f64::INFINITY,
            nodes,
        }),
    }
}

fn is_binary(v: f64) -> bool {
    (v - v.round()).abs() <= INT_TOL && (v.round() == 0.0 || v.round() == 1.0)
}

// --- LP text format (external-solver boundary) ---

/// Write the program in the common LP text format (Minimize/Subject To/
/// Bounds/End). Variables are named x0..x{n-1}, rows c0..c{m-1}.
pub fn write_lp_text(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Min => "Minimize\n obj:",
        Sense::Max => "Maximize\n obj:",
    });
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            out.push_str(&format!(
                " {} {} x{}",
                if c < 0.0 { "-" } else { "+" },
                c.abs(),
                j
            ));
        }
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        out.push_str(&format!(" c{i}:"));
        for &(j, v) in &row.coeffs {
            out.push_str(&format!(
                " {} {} x{}",
                if v < 0.0 { "-" } else { "+" },
                v.abs(),
                j
            ));
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(" {rel} {}\n", row.rhs));
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        if lo.is_infinite() && up.is_infinite() {
            out.push_str(&format!(" x{j} free\n"));
        } else if up.is_infinite() {
            out.push_str(&format!(" {lo} <= x{j}\n"));
        } else if lo.is_infinite() {
            out.push_str(&format!(" x{j} <= {up}\n"));
        } else {
            out.push_str(&format!(" {lo} <= x{j} <= {up}\n"));
        }
    }
    out.push_str("End\n");
    out
}

/// Parse the subset of the LP text format emitted by [`write_lp_text`].
pub fn parse_lp_text(text: &str) -> Result<LinearProgram, LpError> {
    #[derive(PartialEq)]
    enum Section {
        Objective,
        Rows,
        Bounds,
    }
    let mut sense = Sense::Min;
    let mut section = None;
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    let mut bounds: Vec<(usize, f64, f64)> = Vec::new();
    let mut max_var = 0usize;
    let var_idx = |tok: &str| -> Result<usize, LpError> {
        tok.strip_prefix('x')
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| LpError::Dimension(format!("bad variable token {tok}")))
    };
    let parse_terms = |body: &str, max_var: &mut usize| -> Result<Vec<(usize, f64)>, LpError> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for tok in body.split_whitespace() {
            match tok {
                "+" => sign = 1.0,
                "-" => sign = -1.0,
                t if t.starts_with('x') => {
                    let j = var_idx(t)?;
                    *max_var = (*max_var).max(j + 1);
                    out.push((j, sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
                t => {
                    coef = Some(
                        t.parse()
                            .map_err(|_| LpError::Dimension(format!("bad coefficient {t}")))?,
                    );
                }
            }
        }
        Ok(out)
    };
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        match lower.as_str() {
            "minimize" => {
                sense = Sense::Min;
                section = Some(Section::Objective);
                continue;
            }
            "maximize" => {
                sense = Sense::Max;
                section = Some(Section::Objective);
                continue;
            }
            "subject to" => {
                section = Some(Section::Rows);
                continue;
            }
            "bounds" => {
                section = Some(Section::Bounds);
                continue;
            }
            "end" => break,
            _ => {}
        }
        let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
        match section {
            Some(Section::Objective) => {
                terms.extend(parse_terms(body, &mut max_var)?);
            }
            Some(Section::Rows) => {
                let (rel, rel_str) = if body.contains("<=") {
                    (Relation::Le, "<=")
                } else if body.contains(">=") {
                    (Relation::Ge, ">=")
                } else {
                    (Relation::Eq, "=")
                };
                let (lhs, rhs) = body
                    .split_once(rel_str)
                    .ok_or_else(|| LpError::Dimension(format!("bad row: {line}")))?;
                let rhs: f64 = rhs
                    .trim()
                    .parse()
                    .map_err(|_| LpError::Dimension(format!("bad rhs: {line}")))?;
                rows.push((parse_terms(lhs, &mut max_var)?, rel, rhs));
            }
            Some(Section::Bounds) => {
                let toks: Vec<&str> = body.split_whitespace().collect();
                match toks.as_slice() {
                    [v, "free"] => {
                        bounds.push((var_idx(v)?, f64::NEG_INFINITY, f64::INFINITY));
                    }
                    [lo, "<=", v, "<=", up] => {
                        bounds.push((
                            var_idx(v)?,
                            lo.parse().map_err(|_| LpError::Dimension(line.into()))?,
                            up.parse().map_err(|_| LpError::Dimension(line.into()))?,
                        ));
                    }
                    [a, "<=", b] => {
                        if b.starts_with('x') {
                            bounds.push((
                                var_idx(b)?,
                                a.parse().map_err(|_| LpError::Dimension(line.into()))?,
                                f64::INFINITY,
                            ));
                        } else {
                            bounds.push((
                                var_idx(a)?,
                                f64::NEG_INFINITY,
                                b.parse().map_err(|_| LpError::Dimension(line.into()))?,
                            ));
                        }
                    }
                    _ => return Err(LpError::Dimension(format!("bad bound: {line}"))),
                }
                if let Some(&(j, _, _)) = bounds.last() {
                    max_var = max_var.max(j + 1);
                }
            }
            None => return Err(LpError::Dimension(format!("content before header: {line}"))),
        }
    }
    let mut obj = vec![0.0; max_var];
    for (j, c) in terms {
        obj[j] += c;
    }
    let mut lp = LinearProgram::new(sense, obj);
    for (coeffs, rel, rhs) in rows {
        lp.add_row(coeffs, rel, rhs);
    }
    for (j, lo, up) in bounds {
        lp.set_bounds(j, lo, up);
    }
    Ok(lp)
}
