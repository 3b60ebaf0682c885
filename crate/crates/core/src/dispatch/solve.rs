use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::build::{BatteryColumns, DispatchModel};
use super::case::NetworkCase;
use super::formulation::{BatteryModel, FormulationKind, TriangleGrid};
use crate::error::{Error, Result};
use crate::optim::{solve_lp, solve_milp_with, FixingHeuristic, MilpOptions, MixedIntegerProgram, Solution, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchOptions {
    pub milp: MilpOptions,
    /// Largest independent residual accepted after the solve.
    pub verify_tolerance: f64,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        DispatchOptions {
            milp: MilpOptions::default(),
            verify_tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySchedule {
    pub node: usize,
    #[serde(rename = "energy_capacity_Wh")]
    pub energy_capacity_wh: f64,
    #[serde(rename = "initial_energy_Wh")]
    pub initial_energy_wh: f64,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(rename = "p_dis_W")]
    pub p_dis: Vec<f64>,
    #[serde(rename = "p_cha_W")]
    pub p_cha: Vec<f64>,
    #[serde(rename = "p_out_W")]
    pub p_out: Vec<f64>,
    #[serde(rename = "p_in_W")]
    pub p_in: Vec<f64>,
    #[serde(rename = "energy_Wh")]
    pub energy: Vec<f64>,
    pub soc: Vec<f64>,
    /// `[t][j]` discharge sample or vertex weights.
    pub dis_weights: Vec<Vec<f64>>,
    pub cha_weights: Vec<Vec<f64>>,
}

/// Solved dispatch in physical units, indexed `[t][entity]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub case_name: String,
    pub formulation: FormulationKind,
    pub status: Status,
    pub objective: f64,
    pub best_bound: f64,
    pub time_step_h: f64,
    #[serde(rename = "generation_W")]
    pub generation: Vec<Vec<f64>>,
    #[serde(rename = "flow_W")]
    pub flow: Vec<Vec<f64>>,
    #[serde(rename = "angle_rad")]
    pub angle: Vec<Vec<f64>>,
    #[serde(rename = "shed_W", default, skip_serializing_if = "Vec::is_empty")]
    pub shed: Vec<Vec<f64>>,
    pub batteries: Vec<BatterySchedule>,
    pub stats: ScheduleStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub iterations: usize,
    pub nodes: usize,
    pub solve_seconds: f64,
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
    pub nonzeros: usize,
}

impl DispatchSchedule {
    pub fn horizon(&self) -> usize {
        self.generation.len()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Worst residual of every constraint family, recomputed from case data.
/// Balance residuals are relative to `max(1, demand)`; the rest are in
/// W, Wh or per-unit as natural for the family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub balance: f64,
    pub dc_flow: f64,
    pub flow_limit: f64,
    pub generator_limit: f64,
    pub angle_limit: f64,
    pub reference_angle: f64,
    pub energy_balance: f64,
    pub cyclic: f64,
    pub energy_limit: f64,
    pub soc_link: f64,
    pub battery_power: f64,
    pub weight_sum: f64,
    pub weight_sign: f64,
    /// Largest `p_dis * p_cha / (p_dis_max * p_cha_max)` over batteries and steps.
    pub simultaneous: f64,
}

impl Residuals {
    /// Every family except the simultaneous-operation ratio, which is a
    /// property of the optimum rather than a constraint.
    pub fn families(&self) -> [(&'static str, f64); 13] {
        [
            ("balance", self.balance),
            ("dc_flow", self.dc_flow),
            ("flow_limit", self.flow_limit),
            ("generator_limit", self.generator_limit),
            ("angle_limit", self.angle_limit),
            ("reference_angle", self.reference_angle),
            ("energy_balance", self.energy_balance),
            ("cyclic", self.cyclic),
            ("energy_limit", self.energy_limit),
            ("soc_link", self.soc_link),
            ("battery_power", self.battery_power),
            ("weight_sum", self.weight_sum),
            ("weight_sign", self.weight_sign),
        ]
    }

    pub fn worst(&self) -> (&'static str, f64) {
        self.families()
            .into_iter()
            .fold(("none", 0.0), |acc, (k, v)| if v > acc.1 || v.is_nan() { (k, v) } else { acc })
    }
}

/// Solves a built dispatch model and verifies the result independently.
pub fn solve_dispatch(case: &NetworkCase, model: &DispatchModel, opts: &DispatchOptions) -> Result<DispatchSchedule> {
    let start = Instant::now();
    let sol = if model.is_milp() {
        let heuristic = TriangleFixing::new(model);
        solve_milp_with(&model.program, &opts.milp, Some(&heuristic))?
    } else {
        solve_lp(&model.program.lp, &opts.milp.lp)?
    };
    let elapsed = start.elapsed().as_secs_f64();
    info!(
        "{} dispatch: {} after {} iterations, {} nodes, {:.3} s",
        model.kind, sol.status, sol.stats.iterations, sol.stats.nodes, elapsed
    );
    let usable = sol.status == Status::Optimal || (sol.status == Status::NodeLimit && sol.objective.is_finite());
    if !usable {
        return Err(Error::Solver {
            status: sol.status.to_string(),
        });
    }
    if sol.status == Status::NodeLimit {
        warn!(
            "node limit reached: incumbent {} with bound {}",
            sol.objective, sol.best_bound
        );
    }
    let schedule = extract(case, model, &sol, elapsed);
    let res = verify_schedule(case, model, &schedule);
    let (family, worst) = res.worst();
    if !(worst <= opts.verify_tolerance) {
        return Err(Error::Verification(format!(
            "{family} residual {worst:e} exceeds {:e}",
            opts.verify_tolerance
        )));
    }
    Ok(schedule)
}

/// Builds and verifies a schedule from a primal vector produced elsewhere,
/// e.g. an external solver fed the exported MPS file.
pub fn schedule_from_primal(
    case: &NetworkCase,
    model: &DispatchModel,
    primal: Vec<f64>,
    opts: &DispatchOptions,
) -> Result<DispatchSchedule> {
    let lp = &model.program.lp;
    if primal.len() != lp.num_variables() {
        return Err(Error::Model(format!(
            "{} values for {} model variables",
            primal.len(),
            lp.num_variables()
        )));
    }
    let objective = lp.objective(&primal);
    let sol = Solution {
        status: Status::Optimal,
        objective,
        primal,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        best_bound: objective,
        stats: Default::default(),
    };
    let schedule = extract(case, model, &sol, 0.0);
    let (family, worst) = verify_schedule(case, model, &schedule).worst();
    if !(worst <= opts.verify_tolerance) {
        return Err(Error::Verification(format!(
            "{family} residual {worst:e} exceeds {:e}",
            opts.verify_tolerance
        )));
    }
    Ok(schedule)
}

fn extract(case: &NetworkCase, model: &DispatchModel, sol: &Solution, elapsed: f64) -> DispatchSchedule {
    let x = &sol.primal;
    let base = model.base_power_w;
    let pick = |cols: &Vec<Vec<usize>>, scale: f64| -> Vec<Vec<f64>> {
        cols.iter().map(|row| row.iter().map(|&j| x[j] * scale).collect()).collect()
    };
    let series = |cols: &[usize], scale: f64| -> Vec<f64> { cols.iter().map(|&j| x[j] * scale).collect() };
    let batteries = case
        .batteries
        .iter()
        .zip(&model.layout.batteries)
        .zip(&model.formulations)
        .map(|((site, cols), form): ((_, &BatteryColumns), _)| BatterySchedule {
            node: site.node,
            energy_capacity_wh: form.energy_capacity_wh,
            initial_energy_wh: site.initial_energy(),
            temperature: site.temperature,
            p_dis: series(&cols.p_dis, base),
            p_cha: series(&cols.p_cha, base),
            p_out: series(&cols.p_out, base),
            p_in: series(&cols.p_in, base),
            energy: series(&cols.energy, base),
            soc: series(&cols.soc, 1.0),
            dis_weights: pick(&cols.dis_weights, 1.0),
            cha_weights: pick(&cols.cha_weights, 1.0),
        })
        .collect();
    let lp = &model.program.lp;
    DispatchSchedule {
        case_name: case.name.clone(),
        formulation: model.kind,
        status: sol.status,
        objective: sol.objective,
        best_bound: sol.best_bound,
        time_step_h: case.time_step_h,
        generation: pick(&model.layout.generation, base),
        flow: pick(&model.layout.flow, base),
        angle: pick(&model.layout.angle, 1.0),
        shed: pick(&model.layout.shed, base),
        batteries,
        stats: ScheduleStats {
            iterations: sol.stats.iterations,
            nodes: sol.stats.nodes,
            solve_seconds: elapsed,
            variables: lp.num_variables(),
            constraints: lp.num_constraints(),
            binaries: model.program.binaries().len(),
            nonzeros: lp.num_nonzeros(),
        },
    }
}

fn excess(value: f64, lo: f64, hi: f64) -> f64 {
    (lo - value).max(value - hi).max(0.0)
}

/// Recomputes every dispatch constraint from the case data and the model's
/// battery formulations, without reference to the LP.
pub fn verify_schedule(case: &NetworkCase, model: &DispatchModel, schedule: &DispatchSchedule) -> Residuals {
    let mut r = Residuals::default();
    let steps = case.horizon();
    let dt = case.time_step_h;
    let bump = |slot: &mut f64, v: f64| {
        if v > *slot || v.is_nan() {
            *slot = v;
        }
    };
    for t in 0..steps {
        let mut net = vec![0.0; case.nodes.len()];
        for (g, gen) in case.generators.iter().enumerate() {
            let p = schedule.generation[t][g];
            net[gen.node] += p;
            bump(&mut r.generator_limit, excess(p, gen.p_min_w, gen.p_max_w));
        }
        for (l, line) in case.lines.iter().enumerate() {
            let f = schedule.flow[t][l];
            net[line.from] -= f;
            net[line.to] += f;
            let implied = case.base_power_w / line.reactance * (schedule.angle[t][line.from] - schedule.angle[t][line.to]);
            bump(&mut r.dc_flow, (f - implied).abs());
            bump(&mut r.flow_limit, excess(f, -line.flow_limit_w, line.flow_limit_w));
        }
        for (site, b) in case.batteries.iter().zip(&schedule.batteries) {
            net[site.node] += b.p_dis[t] - b.p_cha[t];
        }
        if !schedule.shed.is_empty() {
            for (n, v) in net.iter_mut().enumerate() {
                *v += schedule.shed[t][n];
                bump(&mut r.generator_limit, excess(schedule.shed[t][n], 0.0, case.demand[t][n]));
            }
        }
        for (n, node) in case.nodes.iter().enumerate() {
            let d = case.demand[t][n];
            bump(&mut r.balance, (net[n] - d).abs() / d.max(1.0));
            let a = schedule.angle[t][n];
            bump(&mut r.angle_limit, excess(a, node.angle_min, node.angle_max));
            if node.reference {
                bump(&mut r.reference_angle, a.abs());
            }
        }
    }

    for (form, b) in model.formulations.iter().zip(&schedule.batteries) {
        let cap = form.energy_capacity_wh;
        for t in 0..steps {
            if cap > 0.0 {
                bump(&mut r.soc_link, (b.soc[t] - b.energy[t] / cap).abs());
            } else {
                bump(&mut r.soc_link, b.soc[t].abs());
            }
            bump(&mut r.energy_limit, excess(b.energy[t], 0.0, cap));
            if t > 0 {
                let expect = b.energy[t - 1] + (b.p_in[t - 1] - b.p_out[t - 1]) * dt;
                bump(&mut r.energy_balance, (b.energy[t] - expect).abs());
            }
            for p in [b.p_dis[t], b.p_cha[t], b.p_out[t], b.p_in[t]] {
                bump(&mut r.battery_power, (-p).max(0.0));
            }
            if t + 1 == steps {
                for p in [b.p_dis[t], b.p_cha[t], b.p_out[t], b.p_in[t]] {
                    bump(&mut r.battery_power, p.abs());
                }
            }
        }
        if steps > 0 {
            bump(&mut r.energy_limit, (b.energy[0] - b.initial_energy_wh).abs());
            bump(&mut r.cyclic, (b.energy[steps - 1] - b.energy[0]).abs());
        }
        let (dis_max, cha_max) = match &form.model {
            BatteryModel::Ideal(i) => {
                for t in 0..steps {
                    bump(&mut r.battery_power, excess(b.p_dis[t], 0.0, i.p_max_dis));
                    bump(&mut r.battery_power, excess(b.p_cha[t], 0.0, i.p_max_cha));
                    bump(&mut r.battery_power, (b.p_out[t] - b.p_dis[t] / i.eta_dis).abs());
                    bump(&mut r.battery_power, (b.p_in[t] - b.p_cha[t] * i.eta_cha).abs());
                }
                (i.p_max_dis, i.p_max_cha)
            }
            BatteryModel::Envelope { discharge, charge } => {
                for t in 0..steps {
                    let dis = combine(&b.dis_weights[t], &discharge.samples, &mut r);
                    let cha = combine(&b.cha_weights[t], &charge.samples, &mut r);
                    bump(&mut r.battery_power, (b.p_dis[t] - dis[1]).abs());
                    bump(&mut r.battery_power, (b.p_out[t] - dis[2]).abs());
                    bump(&mut r.battery_power, (b.p_cha[t] - cha[1]).abs());
                    bump(&mut r.battery_power, (b.p_in[t] - cha[2]).abs());
                    bump(&mut r.soc_link, (b.soc[t] - dis[0] - cha[0]).abs());
                    bump(&mut r.energy_limit, excess(b.soc[t], 0.0, 1.0));
                }
                (discharge.max_terminal_power(), charge.max_terminal_power())
            }
            BatteryModel::Triangle { discharge, charge } => {
                for t in 0..steps {
                    for (grid, w, p, pi) in [
                        (discharge, &b.dis_weights[t], b.p_dis[t], b.p_out[t]),
                        (charge, &b.cha_weights[t], b.p_cha[t], b.p_in[t]),
                    ] {
                        let v = combine(w, &grid.vertices, &mut r);
                        bump(&mut r.battery_power, (p - v[1]).abs());
                        bump(&mut r.battery_power, (pi - v[2]).abs());
                        bump(&mut r.soc_link, (b.soc[t] - v[0]).abs());
                        bump(&mut r.weight_sign, support_outside_one_triangle(grid, w));
                    }
                }
                (
                    discharge.vertices.iter().map(|v| v.p_terminal).fold(0.0, f64::max),
                    charge.vertices.iter().map(|v| v.p_terminal).fold(0.0, f64::max),
                )
            }
        };
        let scale = dis_max * cha_max;
        if scale > 0.0 {
            for t in 0..steps {
                bump(&mut r.simultaneous, b.p_dis[t] * b.p_cha[t] / scale);
            }
        }
    }
    r
}

/// Weighted (soc, p_terminal, p_internal) and simplex residuals.
fn combine(w: &[f64], samples: &[crate::characterization::EnvelopeSample], r: &mut Residuals) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut sum = 0.0;
    for (&wj, s) in w.iter().zip(samples) {
        out[0] += wj * s.soc;
        out[1] += wj * s.p_terminal;
        out[2] += wj * s.p_internal;
        sum += wj;
        if -wj > r.weight_sign {
            r.weight_sign = -wj;
        }
    }
    if (sum - 1.0).abs() > r.weight_sum {
        r.weight_sum = (sum - 1.0).abs();
    }
    out
}

/// Total weight on vertices outside the best single triangle.
fn support_outside_one_triangle(grid: &TriangleGrid, w: &[f64]) -> f64 {
    let total: f64 = w.iter().map(|v| v.max(0.0)).sum();
    let best = grid
        .triangles
        .iter()
        .map(|tri| tri.iter().map(|&v| w[v].max(0.0)).sum::<f64>())
        .fold(0.0, f64::max);
    total - best
}

/// Fixes each triangle selector to the triangle containing the relaxed
/// operating point.
pub struct TriangleFixing {
    blocks: Vec<(TriangleGrid, Vec<usize>, Vec<usize>)>,
}

impl TriangleFixing {
    pub fn new(model: &DispatchModel) -> Self {
        let mut blocks = Vec::new();
        for (form, cols) in model.formulations.iter().zip(&model.layout.batteries) {
            if let BatteryModel::Triangle { discharge, charge } = &form.model {
                for t in 0..cols.dis_select.len() {
                    blocks.push((discharge.clone(), cols.dis_weights[t].clone(), cols.dis_select[t].clone()));
                    blocks.push((charge.clone(), cols.cha_weights[t].clone(), cols.cha_select[t].clone()));
                }
            }
        }
        TriangleFixing { blocks }
    }
}

impl FixingHeuristic for TriangleFixing {
    fn propose(&self, _mip: &MixedIntegerProgram, relaxation: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (grid, lam, z) in &self.blocks {
            let w: Vec<f64> = lam.iter().map(|&j| relaxation[j].max(0.0)).collect();
            let soc: f64 = w.iter().zip(&grid.vertices).map(|(a, v)| a * v.soc).sum();
            let p: f64 = w.iter().zip(&grid.vertices).map(|(a, v)| a * v.p_terminal).sum();
            let chosen = (0..grid.triangles.len())
                .find(|&k| grid.interpolate_in(k, soc, p).is_some())
                .unwrap_or_else(|| {
                    (0..grid.triangles.len())
                        .max_by(|&a, &b| {
                            let mass = |k: usize| grid.triangles[k].iter().map(|&v| w[v]).sum::<f64>();
                            mass(a).total_cmp(&mass(b)).then(b.cmp(&a))
                        })
                        .unwrap_or(0)
                });
            for (k, &zk) in z.iter().enumerate() {
                out.push((zk, if k == chosen { 1.0 } else { 0.0 }));
            }
        }
        out
    }
}
