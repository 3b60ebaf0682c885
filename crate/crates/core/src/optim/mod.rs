//! LP/MILP backend: sparse bounded revised simplex, branch and bound, MPS.

mod lu;
pub mod milp;
pub mod model;
pub mod mps;
pub mod simplex;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use milp::{solve_milp, solve_milp_with, FixingHeuristic, MilpOptions};
pub use model::{Constraint, LinearProgram, MixedIntegerProgram, Sense, Variable};
pub use mps::{export_mps, import_mps, read_solution_csv, write_mps, MpsModel};
pub use simplex::{solve_lp, Basis, SimplexEngine};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute primal feasibility.
    pub feasibility: f64,
    /// Reduced-cost threshold for pricing.
    pub optimality: f64,
    pub integrality: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            optimality: 1e-9,
            integrality: 1e-6,
            pivot: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerances: Tolerances::default(),
            max_iterations: 2_000_000,
            refactor_interval: 50,
            bland_after: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NodeLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
            Status::NodeLimit => "node-limit",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub nodes: usize,
    pub refactorizations: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row duals (empty for MILP).
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Lower bound on the optimum; equals `objective` for a closed LP or MILP.
    pub best_bound: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Duality gap `|c'x - (b'y + bound terms)|` implied by the stored duals
    /// and reduced costs.
    pub fn duality_gap(&self, lp: &LinearProgram) -> f64 {
        if self.duals.len() != lp.num_constraints() || self.reduced_costs.len() != lp.num_variables() {
            return f64::INFINITY;
        }
        (self.objective - dual_objective(lp, &self.duals, &self.reduced_costs)).abs()
    }
}

/// Dual objective `b'y + sum_j d_j * bound_j` where each reduced cost is
/// charged to the bound it points at.
pub fn dual_objective(lp: &LinearProgram, duals: &[f64], reduced_costs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (c, &y) in lp.constraints.iter().zip(duals) {
        total += c.rhs * y;
    }
    for (v, &d) in lp.variables.iter().zip(reduced_costs) {
        let bound = if d > 0.0 { v.lower } else { v.upper };
        if d != 0.0 {
            if bound.is_finite() {
                total += d * bound;
            } else if d.abs() > 1e-9 {
                return f64::NEG_INFINITY;
            }
        }
    }
    total
}
