use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::electrochem::BatteryParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: u32,
    pub angle_min: f64,
    pub angle_max: f64,
    pub reference: bool,
}

/// Line between two node indices; flow is positive from `from` to `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance in per-unit on the case base power.
    pub reactance: f64,
    pub flow_limit_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub node: usize,
    pub p_min_w: f64,
    pub p_max_w: f64,
    /// Currency per Wh.
    pub cost_per_wh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatterySite {
    pub node: usize,
    pub params: BatteryParams,
    /// Energy at the first step; half the nameplate energy when absent.
    pub initial_energy_wh: Option<f64>,
    pub temperature: f64,
}

impl BatterySite {
    pub fn new(node: usize, params: BatteryParams) -> Self {
        let temperature = params.t_ref;
        BatterySite {
            node,
            params,
            initial_energy_wh: None,
            temperature,
        }
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy_wh
            .unwrap_or(0.5 * self.params.energy_capacity_wh)
    }
}

/// Network, generation, storage placement and a node x time demand profile.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    /// Power base for per-unit reactances and angle scaling, in watts.
    pub base_power_w: f64,
    pub time_step_h: f64,
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub batteries: Vec<BatterySite>,
    /// `demand[t][n]` in watts.
    pub demand: Vec<Vec<f64>>,
}

impl NetworkCase {
    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn reference_node(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.reference)
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// The first `steps` time steps of the case.
    pub fn truncated(&self, steps: usize) -> NetworkCase {
        let mut case = self.clone();
        case.demand.truncate(steps);
        case
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.demand[t].iter().sum()
    }

    /// Every invariant violation, in one pass.
    pub fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let n = self.nodes.len();
        if n == 0 {
            issues.push("case has no nodes".into());
        }
        let refs = self.nodes.iter().filter(|n| n.reference).count();
        if refs != 1 {
            issues.push(format!("exactly one reference node required, found {refs}"));
        }
        if !(self.base_power_w > 0.0 && self.base_power_w.is_finite()) {
            issues.push(format!("base_power_W must be positive, got {}", self.base_power_w));
        }
        if !(self.time_step_h > 0.0 && self.time_step_h.is_finite()) {
            issues.push(format!("time_step_h must be positive, got {}", self.time_step_h));
        }
        let mut ids = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                issues.push(format!("node id {} is repeated", node.id));
            }
            if !(node.angle_min <= node.angle_max) {
                issues.push(format!(
                    "node {}: angle_min {} exceeds angle_max {}",
                    node.id, node.angle_min, node.angle_max
                ));
            }
            if node.reference && !(node.angle_min <= 0.0 && node.angle_max >= 0.0) {
                issues.push(format!("reference node {} excludes angle 0", node.id));
            }
        }
        for (l, line) in self.lines.iter().enumerate() {
            if line.from >= n || line.to >= n {
                issues.push(format!("line {l} references a missing node"));
            } else if line.from == line.to {
                issues.push(format!("line {l} connects node {} to itself", self.nodes[line.from].id));
            }
            if !(line.reactance > 0.0 && line.reactance.is_finite()) {
                issues.push(format!("line {l}: reactance must be positive, got {}", line.reactance));
            }
            if !(line.flow_limit_w > 0.0) {
                issues.push(format!("line {l}: flow limit must be positive, got {}", line.flow_limit_w));
            }
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.node >= n {
                issues.push(format!("generator {g} references a missing node"));
            }
            if !(gen.p_min_w <= gen.p_max_w) || !gen.p_min_w.is_finite() || !gen.p_max_w.is_finite() {
                issues.push(format!(
                    "generator {g}: need finite P_min <= P_max, got {} and {}",
                    gen.p_min_w, gen.p_max_w
                ));
            }
            if !gen.cost_per_wh.is_finite() {
                issues.push(format!("generator {g}: cost is not finite"));
            }
        }
        for (s, bat) in self.batteries.iter().enumerate() {
            if bat.node >= n {
                issues.push(format!("battery {s} references a missing node"));
            }
            for issue in bat.params.validate().issues {
                issues.push(format!("battery {s}: {issue}"));
            }
            let e1 = bat.initial_energy();
            if !(e1 >= 0.0 && e1 <= bat.params.energy_capacity_wh) {
                issues.push(format!(
                    "battery {s}: initial energy {e1} Wh outside [0, {}]",
                    bat.params.energy_capacity_wh
                ));
            }
            if !(bat.temperature > 0.0) {
                issues.push(format!("battery {s}: temperature must be positive"));
            }
        }
        for (t, row) in self.demand.iter().enumerate() {
            if row.len() != n {
                issues.push(format!("demand row {t} has {} entries for {n} nodes", row.len()));
            } else if let Some((k, d)) = row.iter().enumerate().find(|(_, d)| !(**d >= 0.0 && d.is_finite())) {
                issues.push(format!("demand at t={t}, node {} is {d}", self.nodes[k].id));
            }
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            if let Some(islanded) = self.islanded_nodes().first() {
                warn!(
                    "case {}: node {} is not connected to the reference node",
                    self.name, self.nodes[*islanded].id
                );
            }
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Nodes unreachable from the reference node.
    pub fn islanded_nodes(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let Some(root) = self.reference_node() else {
            return Vec::new();
        };
        let mut adj = vec![Vec::new(); n];
        for line in &self.lines {
            if line.from < n && line.to < n {
                adj[line.from].push(line.to);
                adj[line.to].push(line.from);
            }
        }
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..n).filter(|&i| !seen[i]).collect()
    }

    /// Reads `case.json` and the demand CSV it names, resolving relative
    /// paths against the case file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CaseFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let case = file.resolve(dir, path)?;
        case.validate()?;
        Ok(case)
    }

    /// Writes `case.json`, `demand.csv` and one parameter file per battery
    /// into `dir`, returning the case file path. `header` lines prefix the
    /// demand CSV and `provenance` is stored in the case file.
    pub fn save(&self, dir: impl AsRef<Path>, header: &[String], provenance: Option<serde_json::Value>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut batteries = Vec::new();
        for (s, bat) in self.batteries.iter().enumerate() {
            let name = format!("battery_{s}.json");
            bat.params.save(dir.join(&name))?;
            batteries.push(BatteryEntry {
                node: self.nodes[bat.node].id,
                params_file: name,
                initial_energy_wh: bat.initial_energy_wh,
                temperature_k: Some(bat.temperature),
            });
        }
        let file = CaseFile {
            name: self.name.clone(),
            base_power_w: self.base_power_w,
            time_step_h: self.time_step_h,
            demand_file: "demand.csv".into(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    angle_min_rad: n.angle_min,
                    angle_max_rad: n.angle_max,
                    reference: n.reference,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineEntry {
                    from: self.nodes[l.from].id,
                    to: self.nodes[l.to].id,
                    reactance_pu: l.reactance,
                    flow_limit_w: l.flow_limit_w,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorEntry {
                    node: self.nodes[g.node].id,
                    p_min_w: g.p_min_w,
                    p_max_w: g.p_max_w,
                    cost_per_wh: g.cost_per_wh,
                })
                .collect(),
            batteries,
            provenance,
        };
        let case_path = dir.join("case.json");
        let text = serde_json::to_string_pretty(&file).expect("case serializes");
        std::fs::write(&case_path, text + "\n").map_err(|e| Error::io(&case_path, e))?;
        self.write_demand(&dir.join("demand.csv"), header)?;
        Ok(case_path)
    }

    fn write_demand(&self, path: &Path, header: &[String]) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for line in header {
            writeln!(out, "# {line}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["t".to_string()];
        head.extend(self.nodes.iter().map(|n| n.id.to_string()));
        w.write_record(&head).map_err(|e| Error::parse(path, e))?;
        for (t, row) in self.demand.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|d| d.to_string()));
            w.write_record(&rec).map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    #[serde(rename = "base_power_W")]
    base_power_w: f64,
    time_step_h: f64,
    demand_file: String,
    nodes: Vec<NodeEntry>,
    lines: Vec<LineEntry>,
    generators: Vec<GeneratorEntry>,
    #[serde(default)]
    batteries: Vec<BatteryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: u32,
    angle_min_rad: f64,
    angle_max_rad: f64,
    #[serde(default)]
    reference: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineEntry {
    from: u32,
    to: u32,
    reactance_pu: f64,
    #[serde(rename = "flow_limit_W")]
    flow_limit_w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorEntry {
    node: u32,
    #[serde(rename = "p_min_W")]
    p_min_w: f64,
    #[serde(rename = "p_max_W")]
    p_max_w: f64,
    cost_per_wh: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatteryEntry {
    node: u32,
    params_file: String,
    #[serde(rename = "initial_energy_Wh", default, skip_serializing_if = "Option::is_none")]
    initial_energy_wh: Option<f64>,
    #[serde(rename = "temperature_K", default, skip_serializing_if = "Option::is_none")]
    temperature_k: Option<f64>,
}

impl CaseFile {
    fn resolve(self, dir: &Path, origin: &Path) -> Result<NetworkCase> {
        let mut problems = Vec::new();
        let index: BTreeMap<u32, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut lookup = |what: &str, id: u32| -> usize {
            index.get(&id).copied().unwrap_or_else(|| {
                problems.push(format!("{what} references unknown node {id}"));
                usize::MAX
            })
        };
        let lines: Vec<Line> = self
            .lines
            .iter()
            .enumerate()
            .map(|(l, e)| Line {
                from: lookup(&format!("line {l}"), e.from),
                to: lookup(&format!("line {l}"), e.to),
                reactance: e.reactance_pu,
                flow_limit_w: e.flow_limit_w,
            })
            .collect();
        let generators: Vec<Generator> = self
            .generators
            .iter()
            .enumerate()
            .map(|(g, e)| Generator {
                node: lookup(&format!("generator {g}"), e.node),
                p_min_w: e.p_min_w,
                p_max_w: e.p_max_w,
                cost_per_wh: e.cost_per_wh,
            })
            .collect();
        let mut battery_nodes = Vec::new();
        for (s, e) in self.batteries.iter().enumerate() {
            battery_nodes.push(lookup(&format!("battery {s}"), e.node));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let mut batteries = Vec::new();
        for (e, node) in self.batteries.iter().zip(battery_nodes) {
            let params = BatteryParams::load(dir.join(&e.params_file))?;
            let temperature = e.temperature_k.unwrap_or(params.t_ref);
            batteries.push(BatterySite {
                node,
                params,
                initial_energy_wh: e.initial_energy_wh,
                temperature,
            });
        }
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id,
                angle_min: n.angle_min_rad,
                angle_max: n.angle_max_rad,
                reference: n.reference,
            })
            .collect();
        let demand_path = dir.join(&self.demand_file);
        let demand = read_demand(&demand_path, &nodes).map_err(|e| match e {
            Error::Parse { .. } | Error::Io { .. } => e,
            other => Error::parse(origin, other),
        })?;
        Ok(NetworkCase {
            name: self.name,
            base_power_w: self.base_power_w,
            time_step_h: self.time_step_h,
            nodes,
            lines,
            generators,
            batteries,
            demand,
        })
    }
}

/// Rows are time steps, columns node ids; an optional leading `t` column is
/// ignored and nodes without a column have zero demand.
fn read_demand(path: &Path, nodes: &[Node]) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
    let mut columns = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if c == 0 && h == "t" {
            continue;
        }
        let id: u32 = h
            .parse()
            .map_err(|_| Error::parse(path, format!("column header {h:?} is not a node id")))?;
        let n = nodes
            .iter()
            .position(|node| node.id == id)
            .ok_or_else(|| Error::parse(path, format!("column {id} is not a node of the case")))?;
        columns.push((c, n));
    }
    let mut demand = Vec::new();
    for (t, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let mut row = vec![0.0; nodes.len()];
        for &(c, n) in &columns {
            let field = rec.get(c).unwrap_or("");
            row[n] = field
                .parse()
                .map_err(|_| Error::parse(path, format!("row {t}, column {c}: {field:?} is not a number")))?;
        }
        demand.push(row);
    }
    Ok(demand)
}
