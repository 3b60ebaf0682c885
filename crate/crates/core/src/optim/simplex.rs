//! Bounded-variable revised simplex on `[A -I] z = 0`, where the logical
//! column of row `i` carries that row's activity bounds.

use std::time::Instant;

use log::{debug, trace};

use super::lu::{Eta, LuFactor, SparseCol};
use super::model::LinearProgram;
use super::{Solution, SolveStats, SolverOptions, Status};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Snapshot of a simplex basis, used to warm-start a related solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    state: Vec<VarState>,
    heads: Vec<usize>,
}

impl Basis {
    pub fn num_basic(&self) -> usize {
        self.heads.len()
    }
}

enum Step {
    Continue,
    Done(Status),
}

/// Reusable solver state for one LP; bounds may be changed between solves.
pub struct SimplexEngine {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    heads: Vec<usize>,
    lu: LuFactor,
    etas: Vec<Eta>,
    opts: SolverOptions,
    work: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    rejected: Vec<usize>,
    degenerate_run: usize,
    stats: SolveStats,
}

impl SimplexEngine {
    pub fn new(lp: &LinearProgram, opts: SolverOptions) -> Result<Self> {
        lp.validate()?;
        let n = lp.num_variables();
        let m = lp.num_constraints();
        let mut counts = vec![0usize; n + 1];
        for c in &lp.constraints {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &lp.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for c in &lp.constraints {
            let (lo, hi) = c.activity_bounds();
            lower.push(lo);
            upper.push(hi);
        }
        let mut engine = SimplexEngine {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost: lp.variables.iter().map(|v| v.cost).collect(),
            lower,
            upper,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            heads: (n..n + m).collect(),
            lu: LuFactor::default(),
            etas: Vec::new(),
            opts,
            work: vec![0.0; m],
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            rejected: Vec::new(),
            degenerate_run: 0,
            stats: SolveStats::default(),
        };
        for i in 0..m {
            engine.state[n + i] = VarState::Basic;
        }
        for j in 0..n {
            engine.state[j] = engine.resting_state(j, 0.0);
            engine.x[j] = engine.nonbasic_value(j);
        }
        Ok(engine)
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            let hint = self.x[j];
            self.state[j] = self.resting_state(j, hint);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            state: self.state.clone(),
            heads: self.heads.clone(),
        }
    }

    pub fn load_basis(&mut self, basis: &Basis) {
        assert_eq!(basis.heads.len(), self.m);
        assert_eq!(basis.state.len(), self.n + self.m);
        self.state.clone_from(&basis.state);
        self.heads.clone_from(&basis.heads);
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                let s = self.state[j];
                let usable = match s {
                    VarState::AtLower => self.lower[j].is_finite(),
                    VarState::AtUpper => self.upper[j].is_finite(),
                    VarState::Free => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
                    VarState::Basic => true,
                };
                if !usable {
                    self.state[j] = self.resting_state(j, 0.0);
                }
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn resting_state(&self, j: usize, hint: f64) -> VarState {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                if (hint - hi).abs() < (hint - lo).abs() {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                }
            }
            (true, false) => VarState::AtLower,
            (false, true) => VarState::AtUpper,
            (false, false) => VarState::Free,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic => self.x[j],
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            SparseCol {
                idx: self.col_row[r.clone()].to_vec(),
                val: self.col_val[r].to_vec(),
            }
        } else {
            SparseCol {
                idx: vec![j - self.n],
                val: vec![-1.0],
            }
        }
    }

    fn refactor(&mut self) {
        let cols: Vec<SparseCol> = self.heads.iter().map(|&j| self.column(j)).collect();
        let (lu, replaced) = LuFactor::factorize(self.m, &cols);
        self.lu = lu;
        self.etas.clear();
        self.stats.refactorizations += 1;
        if !replaced.is_empty() {
            debug!("basis singular: {} column(s) replaced by logicals", replaced.len());
        }
        for r in replaced {
            let old = self.heads[r.position];
            let logical = self.n + r.row;
            self.heads[r.position] = logical;
            self.state[logical] = VarState::Basic;
            let hint = self.x[old];
            self.state[old] = self.resting_state(old, hint);
            self.x[old] = self.nonbasic_value(old);
        }
        self.compute_basic_values();
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n {
            if self.state[j] != VarState::Basic {
                let xj = self.x[j];
                if xj != 0.0 {
                    for k in self.col_start[j]..self.col_start[j + 1] {
                        rhs[self.col_row[k]] -= self.col_val[k] * xj;
                    }
                }
            }
        }
        for i in 0..self.m {
            let j = self.n + i;
            if self.state[j] != VarState::Basic {
                rhs[i] += self.x[j];
            }
        }
        self.lu.solve(&mut rhs, &mut self.work);
        for (p, &j) in self.heads.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn ftran(&mut self, v: &mut [f64]) {
        self.lu.solve(v, &mut self.work);
        for eta in &self.etas {
            eta.apply(v);
        }
    }

    fn btran(&mut self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            eta.apply_transpose(v);
        }
        self.lu.solve_transpose(v, &mut self.work);
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.opts.tolerances.feasibility;
        let xj = self.x[j];
        if xj < self.lower[j] - tol {
            -1.0
        } else if xj > self.upper[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn reduced_cost(&self, j: usize, phase_one: bool) -> f64 {
        if j < self.n {
            let mut d = if phase_one { 0.0 } else { self.cost[j] };
            for k in self.col_start[j]..self.col_start[j + 1] {
                d -= self.y[self.col_row[k]] * self.col_val[k];
            }
            d
        } else {
            self.y[j - self.n]
        }
    }

    fn price(&self, phase_one: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.tolerances.optimality;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n + self.m {
            let s = self.state[j];
            if s == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, phase_one);
            let eligible = match s {
                VarState::AtLower => d < -tol,
                VarState::AtUpper => d > tol,
                VarState::Free => d.abs() > tol,
                VarState::Basic => false,
            };
            if !eligible || self.rejected.contains(&j) {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn iterate(&mut self, phase_one: bool) -> Step {
        let m = self.m;
        let tol = self.opts.tolerances.feasibility;
        let mut cb = std::mem::take(&mut self.y);
        for p in 0..m {
            let j = self.heads[p];
            cb[p] = if phase_one {
                self.infeasibility(j)
            } else if j < self.n {
                self.cost[j]
            } else {
                0.0
            };
        }
        self.btran(&mut cb);
        self.y = cb;

        let bland = self.degenerate_run >= self.opts.bland_after;
        let Some((q, d)) = self.price(phase_one, bland) else {
            if !self.rejected.is_empty() || !self.etas.is_empty() {
                self.rejected.clear();
                self.refactor();
                return Step::Continue;
            }
            return Step::Done(if phase_one { Status::Infeasible } else { Status::Optimal });
        };

        let mut alpha = std::mem::take(&mut self.alpha);
        alpha.iter_mut().for_each(|a| *a = 0.0);
        if q < self.n {
            for k in self.col_start[q]..self.col_start[q + 1] {
                alpha[self.col_row[k]] = self.col_val[k];
            }
        } else {
            alpha[q - self.n] = -1.0;
        }
        self.ftran(&mut alpha);

        // Entering moves up for negative reduced cost, down otherwise.
        let dir = if d < 0.0 { 1.0 } else { -1.0 };
        let piv_tol = self.opts.tolerances.pivot;

        // Limits per basic position: (position, exact step, relaxed step, target bound).
        let limit = |p: usize, alpha: &[f64], relax: f64| -> Option<(f64, f64)> {
            let a = alpha[p];
            if a.abs() < piv_tol {
                return None;
            }
            let rate = -dir * a;
            let k = self.heads[p];
            let xk = self.x[k];
            let (lo, hi) = (self.lower[k], self.upper[k]);
            let bound = if rate < 0.0 {
                if phase_one && xk > hi + tol {
                    hi
                } else if phase_one && xk < lo - tol {
                    return None;
                } else {
                    lo
                }
            } else if phase_one && xk < lo - tol {
                lo
            } else if phase_one && xk > hi + tol {
                return None;
            } else {
                hi
            };
            if !bound.is_finite() {
                return None;
            }
            let relaxed = if rate < 0.0 { bound - relax } else { bound + relax };
            Some((((relaxed - xk) / rate).max(0.0), bound))
        };

        let mut leaving: Option<(usize, f64, f64)> = None;
        if bland {
            for p in 0..m {
                if let Some((t, bound)) = limit(p, &alpha, 0.0) {
                    let better = match leaving {
                        None => true,
                        Some((bp, bt, _)) => t < bt || (t == bt && self.heads[p] < self.heads[bp]),
                    };
                    if better {
                        leaving = Some((p, t, bound));
                    }
                }
            }
        } else {
            let mut t_max = f64::INFINITY;
            for p in 0..m {
                if let Some((t, _)) = limit(p, &alpha, tol) {
                    t_max = t_max.min(t);
                }
            }
            if t_max.is_finite() {
                let mut best_a = 0.0;
                for p in 0..m {
                    if let Some((t, bound)) = limit(p, &alpha, 0.0) {
                        if t <= t_max && alpha[p].abs() > best_a {
                            best_a = alpha[p].abs();
                            leaving = Some((p, t, bound));
                        }
                    }
                }
            }
        }

        let range = self.upper[q] - self.lower[q];
        let flip = range.is_finite() && leaving.map_or(true, |(_, t, _)| range <= t);
        if leaving.is_none() && !flip {
            if phase_one {
                self.rejected.push(q);
                self.alpha = alpha;
                return Step::Continue;
            }
            self.alpha = alpha;
            return Step::Done(Status::Unbounded);
        }

        let theta = if flip { range } else { leaving.unwrap().1 };
        if theta > 1e-12 {
            self.degenerate_run = 0;
        } else {
            self.degenerate_run += 1;
        }
        if theta != 0.0 {
            self.x[q] += dir * theta;
            for p in 0..m {
                if alpha[p] != 0.0 {
                    self.x[self.heads[p]] -= dir * theta * alpha[p];
                }
            }
        }
        if flip {
            self.state[q] = if self.state[q] == VarState::AtLower {
                self.x[q] = self.upper[q];
                VarState::AtUpper
            } else {
                self.x[q] = self.lower[q];
                VarState::AtLower
            };
        } else {
            let (r, _, bound) = leaving.unwrap();
            let k = self.heads[r];
            self.x[k] = bound;
            self.state[k] = if bound == self.lower[k] {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.heads[r] = q;
            self.state[q] = VarState::Basic;
            self.etas.push(Eta::new(r, &alpha));
            trace!("pivot in {q} out {k} theta {theta:e}");
        }
        self.rejected.clear();
        self.alpha = alpha;
        Step::Continue
    }

    fn any_infeasible(&self) -> bool {
        self.heads.iter().any(|&j| self.infeasibility(j) != 0.0)
    }

    /// Runs primal simplex from the current basis.
    pub fn solve(&mut self) -> Solution {
        let start = Instant::now();
        self.stats = SolveStats::default();
        self.degenerate_run = 0;
        self.rejected.clear();
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor();

        let status = loop {
            if self.stats.iterations >= self.opts.max_iterations {
                break Status::IterationLimit;
            }
            if self.etas.len() >= self.opts.refactor_interval {
                self.refactor();
            }
            let phase_one = self.any_infeasible();
            self.stats.iterations += 1;
            match self.iterate(phase_one) {
                Step::Continue => {}
                Step::Done(s) => break s,
            }
        };
        // the terminating iteration priced but did not pivot
        self.stats.iterations = self.stats.iterations.saturating_sub(1);
        debug!(
            "simplex {status} after {} iterations ({} refactorizations)",
            self.stats.iterations, self.stats.refactorizations
        );
        self.stats.wall_time = start.elapsed();
        self.extract(status)
    }

    fn extract(&mut self, status: Status) -> Solution {
        let primal: Vec<f64> = self.x[..self.n].to_vec();
        let objective: f64 = primal.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
        let (duals, reduced_costs) = if status == Status::Optimal {
            let mut cb: Vec<f64> = self
                .heads
                .iter()
                .map(|&j| if j < self.n { self.cost[j] } else { 0.0 })
                .collect();
            self.btran(&mut cb);
            self.y = cb;
            let rc = (0..self.n)
                .map(|j| {
                    if self.state[j] == VarState::Basic {
                        0.0
                    } else {
                        self.reduced_cost(j, false)
                    }
                })
                .collect();
            let duals = (0..self.m)
                .map(|i| if self.state[self.n + i] == VarState::Basic { 0.0 } else { self.y[i] })
                .collect();
            (duals, rc)
        } else {
            (Vec::new(), Vec::new())
        };
        Solution {
            status,
            objective,
            primal,
            duals,
            reduced_costs,
            best_bound: if status == Status::Optimal { objective } else { f64::NEG_INFINITY },
            stats: self.stats.clone(),
        }
    }
}

/// Solves `lp` from a slack basis.
pub fn solve_lp(lp: &LinearProgram, opts: &SolverOptions) -> Result<Solution> {
    let mut engine = SimplexEngine::new(lp, opts.clone())?;
    Ok(engine.solve())
}
