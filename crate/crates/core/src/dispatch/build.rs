use std::collections::BTreeMap;

use super::case::NetworkCase;
use super::formulation::{BatteryFormulation, BatteryModel, FormulationKind, TriangleGrid};
use crate::characterization::EnvelopeSample;
use crate::error::{Error, Result};
use crate::optim::{LinearProgram, MixedIntegerProgram, Sense};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuildOptions {
    /// Adds a load-shedding column at every (node, t) with this cost per Wh.
    pub shed_penalty_per_wh: Option<f64>,
}

/// Column indices of one battery's variables, indexed `[t]` or `[t][k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatteryColumns {
    pub p_dis: Vec<usize>,
    pub p_cha: Vec<usize>,
    pub p_out: Vec<usize>,
    pub p_in: Vec<usize>,
    pub energy: Vec<usize>,
    pub soc: Vec<usize>,
    /// Envelope sample weights or triangle vertex weights.
    pub dis_weights: Vec<Vec<usize>>,
    pub cha_weights: Vec<Vec<usize>>,
    /// Triangle selectors (binary), empty for the linear formulations.
    pub dis_select: Vec<Vec<usize>>,
    pub cha_select: Vec<Vec<usize>>,
}

/// Column indices of the network variables, indexed `[t][entity]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layout {
    pub generation: Vec<Vec<usize>>,
    pub flow: Vec<Vec<usize>>,
    pub angle: Vec<Vec<usize>>,
    pub shed: Vec<Vec<usize>>,
    pub batteries: Vec<BatteryColumns>,
}

/// A dispatch problem in per-unit on the case base power: powers in
/// base units, energies in base units x hours, angles in radians.
#[derive(Debug, Clone)]
pub struct DispatchModel {
    pub kind: FormulationKind,
    pub program: MixedIntegerProgram,
    pub layout: Layout,
    pub formulations: Vec<BatteryFormulation>,
    pub base_power_w: f64,
    pub metadata: BTreeMap<String, String>,
}

impl DispatchModel {
    pub fn is_milp(&self) -> bool {
        !self.program.binaries().is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.layout.generation.len()
    }
}

/// Builds the network-constrained economic dispatch for `case` with one
/// formulation per battery.
pub fn build_dispatch(case: &NetworkCase, formulations: &[BatteryFormulation], opts: &BuildOptions) -> Result<DispatchModel> {
    case.validate()?;
    let mut issues = Vec::new();
    if formulations.len() != case.batteries.len() {
        issues.push(format!(
            "{} battery formulations for {} batteries",
            formulations.len(),
            case.batteries.len()
        ));
    }
    for (s, f) in formulations.iter().enumerate() {
        issues.extend(f.issues().into_iter().map(|i| format!("battery {s}: {i}")));
    }
    let kinds: Vec<FormulationKind> = formulations.iter().map(|f| f.kind()).collect();
    if kinds.windows(2).any(|w| w[0] != w[1]) {
        issues.push("all batteries must share one formulation kind".into());
    }
    if let Some(p) = opts.shed_penalty_per_wh {
        if !(p >= 0.0 && p.is_finite()) {
            issues.push(format!("shed penalty must be finite and nonnegative, got {p}"));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    let kind = kinds.first().copied().unwrap_or(FormulationKind::Envelope);

    let mut b = Builder {
        lp: LinearProgram::new(format!("{}_{}", sanitize(&case.name), kind.as_str())),
        binaries: Vec::new(),
        base: case.base_power_w,
        dt: case.time_step_h,
    };
    let mut layout = b.network(case, opts);
    for (s, (site, form)) in case.batteries.iter().zip(formulations).enumerate() {
        let cols = b.battery(case.horizon(), s, site.initial_energy(), form);
        layout.batteries.push(cols);
    }
    balance_rows(&mut b.lp, case, &layout, b.base);

    let mut program = MixedIntegerProgram::new(b.lp);
    for j in b.binaries {
        program.mark_binary(j);
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("formulation".into(), kind.as_str().into());
    metadata.insert("units".into(), format!("power per {} W, energy per {} Wh", case.base_power_w, case.base_power_w));
    metadata.insert("last_step_battery_power".into(), "fixed to 0".into());
    if kind == FormulationKind::MilpTriangle {
        metadata.insert("triangle_diagonal".into(), "lower-left to upper-right".into());
    }
    Ok(DispatchModel {
        kind,
        program,
        layout,
        formulations: formulations.to_vec(),
        base_power_w: case.base_power_w,
        metadata,
    })
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        "dispatch".into()
    } else {
        s
    }
}

struct Builder {
    lp: LinearProgram,
    binaries: Vec<usize>,
    base: f64,
    dt: f64,
}

impl Builder {
    fn var(&mut self, name: String, lo: f64, hi: f64, cost: f64) -> usize {
        self.lp.add_variable(name, lo, hi, cost)
    }

    fn row(&mut self, name: String, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.lp.add_constraint(name, coeffs, sense, rhs);
    }

    fn network(&mut self, case: &NetworkCase, opts: &BuildOptions) -> Layout {
        let steps = case.horizon();
        let s = self.base;
        let mut layout = Layout::default();
        for t in 0..steps {
            let gens = case
                .generators
                .iter()
                .enumerate()
                .map(|(g, gen)| {
                    self.var(
                        format!("pg[{g},{t}]"),
                        gen.p_min_w / s,
                        gen.p_max_w / s,
                        gen.cost_per_wh * s * self.dt,
                    )
                })
                .collect();
            let flows = case
                .lines
                .iter()
                .enumerate()
                .map(|(l, line)| {
                    let cap = line.flow_limit_w / s;
                    self.var(format!("flow[{l},{t}]"), -cap, cap, 0.0)
                })
                .collect();
            let angles = case
                .nodes
                .iter()
                .enumerate()
                .map(|(n, node)| {
                    let (lo, hi) = if node.reference { (0.0, 0.0) } else { (node.angle_min, node.angle_max) };
                    self.var(format!("theta[{n},{t}]"), lo, hi, 0.0)
                })
                .collect();
            layout.generation.push(gens);
            layout.flow.push(flows);
            layout.angle.push(angles);
            if let Some(penalty) = opts.shed_penalty_per_wh {
                let shed = (0..case.nodes.len())
                    .map(|n| self.var(format!("shed[{n},{t}]"), 0.0, case.demand[t][n] / s, penalty * s * self.dt))
                    .collect();
                layout.shed.push(shed);
            }
        }
        for t in 0..steps {
            for (l, line) in case.lines.iter().enumerate() {
                let y = 1.0 / line.reactance;
                self.row(
                    format!("dcflow[{l},{t}]"),
                    vec![
                        (layout.flow[t][l], 1.0),
                        (layout.angle[t][line.from], -y),
                        (layout.angle[t][line.to], y),
                    ],
                    Sense::Eq,
                    0.0,
                );
            }
        }
        layout
    }

    fn battery(&mut self, steps: usize, s: usize, initial_energy_wh: f64, form: &BatteryFormulation) -> BatteryColumns {
        let base = self.base;
        let dt = self.dt;
        let capacity = form.energy_capacity_wh / base;
        let disabled = form.energy_capacity_wh == 0.0;
        let (dis_max, cha_max, out_max, in_max) = match &form.model {
            BatteryModel::Ideal(b) => (b.p_max_dis, b.p_max_cha, b.p_max_dis / b.eta_dis, b.p_max_cha * b.eta_cha),
            BatteryModel::Envelope { discharge, charge } => (
                peak(&discharge.samples, |v| v.p_terminal),
                peak(&charge.samples, |v| v.p_terminal),
                peak(&discharge.samples, |v| v.p_internal),
                peak(&charge.samples, |v| v.p_internal),
            ),
            BatteryModel::Triangle { discharge, charge } => (
                peak(&discharge.vertices, |v| v.p_terminal),
                peak(&charge.vertices, |v| v.p_terminal),
                peak(&discharge.vertices, |v| v.p_internal),
                peak(&charge.vertices, |v| v.p_internal),
            ),
        };

        let mut cols = BatteryColumns::default();
        for t in 0..steps {
            let live = !disabled && t + 1 < steps;
            let hi = |p: f64| if live { p / base } else { 0.0 };
            cols.p_dis.push(self.var(format!("pdis[{s},{t}]"), 0.0, hi(dis_max), 0.0));
            cols.p_cha.push(self.var(format!("pcha[{s},{t}]"), 0.0, hi(cha_max), 0.0));
            cols.p_out.push(self.var(format!("pout[{s},{t}]"), 0.0, hi(out_max), 0.0));
            cols.p_in.push(self.var(format!("pin[{s},{t}]"), 0.0, hi(in_max), 0.0));
            let (elo, ehi) = if t == 0 {
                let e1 = initial_energy_wh / base;
                (e1, e1)
            } else {
                (0.0, capacity)
            };
            cols.energy.push(self.var(format!("e[{s},{t}]"), elo, ehi, 0.0));
            let soc_hi = if disabled { 0.0 } else { 1.0 };
            cols.soc.push(self.var(format!("soc[{s},{t}]"), 0.0, soc_hi, 0.0));
        }

        for t in 0..steps {
            if !disabled {
                self.row(
                    format!("soclink[{s},{t}]"),
                    vec![(cols.soc[t], 1.0), (cols.energy[t], -1.0 / capacity)],
                    Sense::Eq,
                    0.0,
                );
            }
            if t > 0 {
                self.row(
                    format!("energy[{s},{t}]"),
                    vec![
                        (cols.energy[t], 1.0),
                        (cols.energy[t - 1], -1.0),
                        (cols.p_in[t - 1], -dt),
                        (cols.p_out[t - 1], dt),
                    ],
                    Sense::Eq,
                    0.0,
                );
            }
        }
        if steps > 1 {
            self.row(
                format!("cycle[{s}]"),
                vec![(cols.energy[steps - 1], 1.0), (cols.energy[0], -1.0)],
                Sense::Eq,
                0.0,
            );
        }

        match &form.model {
            BatteryModel::Ideal(b) => {
                for t in 0..steps {
                    self.row(
                        format!("pout_def[{s},{t}]"),
                        vec![(cols.p_out[t], 1.0), (cols.p_dis[t], -1.0 / b.eta_dis)],
                        Sense::Eq,
                        0.0,
                    );
                    self.row(
                        format!("pin_def[{s},{t}]"),
                        vec![(cols.p_in[t], 1.0), (cols.p_cha[t], -b.eta_cha)],
                        Sense::Eq,
                        0.0,
                    );
                }
            }
            BatteryModel::Envelope { discharge, charge } => {
                for t in 0..steps {
                    let x: Vec<usize> = (0..discharge.samples.len())
                        .map(|j| self.var(format!("x[{s},{j},{t}]"), 0.0, f64::INFINITY, 0.0))
                        .collect();
                    let y: Vec<usize> = (0..charge.samples.len())
                        .map(|k| self.var(format!("y[{s},{k},{t}]"), 0.0, f64::INFINITY, 0.0))
                        .collect();
                    self.hull_rows(s, t, "dis", "x", &x, &discharge.samples, cols.p_dis[t], cols.p_out[t]);
                    self.hull_rows(s, t, "cha", "y", &y, &charge.samples, cols.p_cha[t], cols.p_in[t]);
                    let mut mix = vec![(cols.soc[t], 1.0)];
                    mix.extend(x.iter().zip(&discharge.samples).map(|(&j, v)| (j, -v.soc)));
                    mix.extend(y.iter().zip(&charge.samples).map(|(&k, v)| (k, -v.soc)));
                    self.row(format!("socmix[{s},{t}]"), mix, Sense::Eq, 0.0);
                    cols.dis_weights.push(x);
                    cols.cha_weights.push(y);
                }
            }
            BatteryModel::Triangle { discharge, charge } => {
                for t in 0..steps {
                    let (ld, zd) = self.triangle_block(s, t, "dis", discharge, cols.p_dis[t], cols.p_out[t], cols.soc[t]);
                    let (lc, zc) = self.triangle_block(s, t, "cha", charge, cols.p_cha[t], cols.p_in[t], cols.soc[t]);
                    cols.dis_weights.push(ld);
                    cols.cha_weights.push(lc);
                    cols.dis_select.push(zd);
                    cols.cha_select.push(zc);
                }
            }
        }
        cols
    }

    /// Terminal and internal power as convex combinations of samples.
    #[allow(clippy::too_many_arguments)]
    fn hull_rows(
        &mut self,
        s: usize,
        t: usize,
        mode: &str,
        weight: &str,
        w: &[usize],
        samples: &[EnvelopeSample],
        p_terminal: usize,
        p_internal: usize,
    ) {
        let base = self.base;
        let (term, int) = if mode == "dis" { ("pdis", "pout") } else { ("pcha", "pin") };
        let mut row = vec![(p_terminal, 1.0)];
        row.extend(w.iter().zip(samples).map(|(&j, v)| (j, -v.p_terminal / base)));
        self.row(format!("{term}_def[{s},{t}]"), row, Sense::Eq, 0.0);
        let mut row = vec![(p_internal, 1.0)];
        row.extend(w.iter().zip(samples).map(|(&j, v)| (j, -v.p_internal / base)));
        self.row(format!("{int}_def[{s},{t}]"), row, Sense::Eq, 0.0);
        self.row(
            format!("{weight}sum[{s},{t}]"),
            w.iter().map(|&j| (j, 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn triangle_block(
        &mut self,
        s: usize,
        t: usize,
        mode: &str,
        grid: &TriangleGrid,
        p_terminal: usize,
        p_internal: usize,
        soc: usize,
    ) -> (Vec<usize>, Vec<usize>) {
        let lam: Vec<usize> = (0..grid.vertices.len())
            .map(|v| self.var(format!("lam_{mode}[{s},{v},{t}]"), 0.0, f64::INFINITY, 0.0))
            .collect();
        let z: Vec<usize> = (0..grid.triangles.len())
            .map(|k| self.var(format!("z_{mode}[{s},{k},{t}]"), 0.0, 1.0, 0.0))
            .collect();
        self.binaries.extend(&z);
        let base = self.base;
        let (term, int) = if mode == "dis" { ("pdis", "pout") } else { ("pcha", "pin") };
        let mut row = vec![(p_terminal, 1.0)];
        row.extend(lam.iter().zip(&grid.vertices).map(|(&j, v)| (j, -v.p_terminal / base)));
        self.row(format!("{term}_def[{s},{t}]"), row, Sense::Eq, 0.0);
        let mut row = vec![(p_internal, 1.0)];
        row.extend(lam.iter().zip(&grid.vertices).map(|(&j, v)| (j, -v.p_internal / base)));
        self.row(format!("{int}_def[{s},{t}]"), row, Sense::Eq, 0.0);
        let mut row = vec![(soc, 1.0)];
        row.extend(lam.iter().zip(&grid.vertices).map(|(&j, v)| (j, -v.soc)));
        self.row(format!("soc_{mode}[{s},{t}]"), row, Sense::Eq, 0.0);
        self.row(
            format!("lsum_{mode}[{s},{t}]"),
            lam.iter().map(|&j| (j, 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
        self.row(
            format!("zsum_{mode}[{s},{t}]"),
            z.iter().map(|&k| (k, 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
        for (v, &l) in lam.iter().enumerate() {
            let mut row = vec![(l, 1.0)];
            row.extend(grid.triangles_of(v).into_iter().map(|k| (z[k], -1.0)));
            self.row(format!("link_{mode}[{s},{v},{t}]"), row, Sense::Le, 0.0);
        }
        (lam, z)
    }
}

fn peak(samples: &[EnvelopeSample], f: impl Fn(&EnvelopeSample) -> f64) -> f64 {
    samples.iter().map(f).fold(0.0, f64::max)
}

fn balance_rows(lp: &mut LinearProgram, case: &NetworkCase, layout: &Layout, base: f64) {
    for t in 0..case.horizon() {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); case.nodes.len()];
        for (g, gen) in case.generators.iter().enumerate() {
            rows[gen.node].push((layout.generation[t][g], 1.0));
        }
        for (l, line) in case.lines.iter().enumerate() {
            rows[line.from].push((layout.flow[t][l], -1.0));
            rows[line.to].push((layout.flow[t][l], 1.0));
        }
        for (site, cols) in case.batteries.iter().zip(&layout.batteries) {
            rows[site.node].push((cols.p_dis[t], 1.0));
            rows[site.node].push((cols.p_cha[t], -1.0));
        }
        if !layout.shed.is_empty() {
            for (n, row) in rows.iter_mut().enumerate() {
                row.push((layout.shed[t][n], 1.0));
            }
        }
        for (n, row) in rows.into_iter().enumerate() {
            lp.add_constraint(format!("balance[{n},{t}]"), row, Sense::Eq, case.demand[t][n] / base);
        }
    }
}
