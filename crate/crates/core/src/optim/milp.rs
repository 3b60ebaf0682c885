//! Branch and bound over binary variables.

use std::time::Instant;

use log::{debug, info};

use super::model::MixedIntegerProgram;
use super::simplex::{Basis, SimplexEngine};
use super::{Solution, SolveStats, SolverOptions, Status};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    pub lp: SolverOptions,
    pub node_limit: usize,
    pub absolute_gap: f64,
    /// Run the fixing heuristic every this many nodes (0 disables it after the root).
    pub heuristic_every: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            lp: SolverOptions::default(),
            node_limit: 100_000,
            absolute_gap: 1e-6,
            heuristic_every: 50,
        }
    }
}

/// Proposes binary fixings from a fractional relaxation; the remaining LP is
/// solved and accepted as an incumbent if it comes out integral.
pub trait FixingHeuristic {
    fn propose(&self, mip: &MixedIntegerProgram, relaxation: &[f64]) -> Vec<(usize, f64)>;
}

struct Node {
    fixings: Vec<(usize, f64, f64)>,
    bound: f64,
    depth: usize,
    basis: Basis,
}

struct Search<'a> {
    mip: &'a MixedIntegerProgram,
    engine: SimplexEngine,
    root_bounds: Vec<(f64, f64)>,
    applied: Vec<usize>,
    opts: &'a MilpOptions,
    incumbent: Option<(f64, Vec<f64>)>,
    stats: SolveStats,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64, f64)]) {
        for j in self.applied.drain(..) {
            let (lo, hi) = self.root_bounds[j];
            self.engine.set_bounds(j, lo, hi);
        }
        for &(j, lo, hi) in fixings {
            self.engine.set_bounds(j, lo, hi);
            self.applied.push(j);
        }
    }

    fn solve_node(&mut self, fixings: &[(usize, f64, f64)], basis: Option<&Basis>) -> Solution {
        self.apply(fixings);
        if let Some(b) = basis {
            self.engine.load_basis(b);
        }
        let sol = self.engine.solve();
        self.stats.iterations += sol.stats.iterations;
        self.stats.refactorizations += sol.stats.refactorizations;
        sol
    }

    fn most_fractional(&self, x: &[f64]) -> Option<(usize, f64)> {
        let tol = self.opts.lp.tolerances.integrality;
        let mut best: Option<(usize, f64)> = None;
        for &j in self.mip.binaries() {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > tol && best.map_or(true, |(bj, _)| {
                let bf = x[bj] - x[bj].floor();
                dist > bf.min(1.0 - bf)
            }) {
                best = Some((j, x[j]));
            }
        }
        best
    }

    fn offer(&mut self, objective: f64, x: &[f64]) -> bool {
        if self.incumbent.as_ref().map_or(true, |(best, _)| objective < *best - self.opts.absolute_gap) {
            let mut snapped = x.to_vec();
            for &j in self.mip.binaries() {
                snapped[j] = snapped[j].round();
            }
            info!("new incumbent {objective:.6} after {} nodes", self.stats.nodes);
            self.incumbent = Some((objective, snapped));
            true
        } else {
            false
        }
    }

    fn run_heuristic(&mut self, h: &dyn FixingHeuristic, relaxed: &[f64], basis: &Basis) {
        let proposal = h.propose(self.mip, relaxed);
        if proposal.is_empty() {
            return;
        }
        let fixings: Vec<(usize, f64, f64)> = proposal.iter().map(|&(j, v)| (j, v, v)).collect();
        let sol = self.solve_node(&fixings, Some(basis));
        if sol.status == Status::Optimal && self.most_fractional(&sol.primal).is_none() {
            self.offer(sol.objective, &sol.primal);
        }
    }
}

pub fn solve_milp(mip: &MixedIntegerProgram, opts: &MilpOptions) -> Result<Solution> {
    solve_milp_with(mip, opts, None)
}

/// Depth-first branch and bound on the most fractional binary, diving into
/// the nearer child and selecting by best bound after a prune.
pub fn solve_milp_with(
    mip: &MixedIntegerProgram,
    opts: &MilpOptions,
    heuristic: Option<&dyn FixingHeuristic>,
) -> Result<Solution> {
    mip.validate()?;
    let start = Instant::now();
    let engine = SimplexEngine::new(&mip.lp, opts.lp.clone())?;
    let root_bounds = (0..mip.lp.num_variables()).map(|j| engine.bounds(j)).collect();
    let mut search = Search {
        mip,
        engine,
        root_bounds,
        applied: Vec::new(),
        opts,
        incumbent: None,
        stats: SolveStats::default(),
    };

    let root = search.solve_node(&[], None);
    search.stats.nodes = 1;
    if root.status != Status::Optimal {
        let mut out = root;
        out.stats = search.stats;
        out.stats.wall_time = start.elapsed();
        out.duals.clear();
        out.reduced_costs.clear();
        return Ok(out);
    }
    let root_basis = search.engine.basis();
    let mut open: Vec<Node> = Vec::new();
    let mut current = Some(Node {
        fixings: Vec::new(),
        bound: root.objective,
        depth: 0,
        basis: root_basis.clone(),
    });
    let mut pending_root = Some(root);
    if let Some(h) = heuristic {
        let relaxed = pending_root.as_ref().unwrap().primal.clone();
        search.run_heuristic(h, &relaxed, &root_basis);
    }

    let mut hit_limit = false;
    loop {
        let node = match current.take() {
            Some(n) => n,
            None => {
                // best bound, ties to the deeper and then older node
                let Some(k) = (0..open.len()).min_by(|&a, &b| {
                    open[a]
                        .bound
                        .total_cmp(&open[b].bound)
                        .then(open[b].depth.cmp(&open[a].depth))
                        .then(a.cmp(&b))
                }) else {
                    break;
                };
                open.swap_remove(k)
            }
        };
        if let Some((best, _)) = &search.incumbent {
            if node.bound >= *best - opts.absolute_gap {
                continue;
            }
        }
        let sol = match pending_root.take() {
            Some(r) => r,
            None => {
                if search.stats.nodes >= opts.node_limit {
                    open.push(node);
                    hit_limit = true;
                    break;
                }
                search.stats.nodes += 1;
                search.solve_node(&node.fixings, Some(&node.basis))
            }
        };
        match sol.status {
            Status::Optimal => {}
            Status::Infeasible => continue,
            Status::Unbounded => {
                return Ok(Solution {
                    status: Status::Unbounded,
                    objective: f64::NEG_INFINITY,
                    primal: sol.primal,
                    duals: Vec::new(),
                    reduced_costs: Vec::new(),
                    best_bound: f64::NEG_INFINITY,
                    stats: search.stats,
                })
            }
            _ => {
                debug!("node LP ended with {}, dropping node", sol.status);
                continue;
            }
        }
        if let Some((best, _)) = &search.incumbent {
            if sol.objective >= *best - opts.absolute_gap {
                continue;
            }
        }
        let Some((j, value)) = search.most_fractional(&sol.primal) else {
            search.offer(sol.objective, &sol.primal);
            continue;
        };
        let basis = search.engine.basis();
        if let Some(h) = heuristic {
            if opts.heuristic_every > 0 && search.stats.nodes % opts.heuristic_every == 0 {
                search.run_heuristic(h, &sol.primal, &basis);
            }
        }
        let mut down = node.fixings.clone();
        down.push((j, 0.0, 0.0));
        let mut up = node.fixings;
        up.push((j, 1.0, 1.0));
        let make = |fixings| Node {
            fixings,
            bound: sol.objective,
            depth: node.depth + 1,
            basis: basis.clone(),
        };
        let (near, far) = if value >= 0.5 { (make(up), make(down)) } else { (make(down), make(up)) };
        open.push(far);
        current = Some(near);
    }

    search.stats.wall_time = start.elapsed();
    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let n = mip.lp.num_variables();
    Ok(match search.incumbent {
        Some((objective, primal)) => Solution {
            status: if hit_limit { Status::NodeLimit } else { Status::Optimal },
            objective,
            primal,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            best_bound: if hit_limit { open_bound.min(objective) } else { objective },
            stats: search.stats,
        },
        None => Solution {
            status: if hit_limit { Status::NodeLimit } else { Status::Infeasible },
            objective: f64::INFINITY,
            primal: vec![f64::NAN; n],
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            best_bound: if hit_limit { open_bound } else { f64::INFINITY },
            stats: search.stats,
        },
    })
}
