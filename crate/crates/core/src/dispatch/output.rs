use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::build::DispatchModel;
use super::case::NetworkCase;
use super::formulation::FormulationKind;
use super::solve::{DispatchSchedule, Residuals};
use crate::error::{Error, Result};
use crate::optim::Status;

/// Results-table row for one solved case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub case: String,
    pub formulation: FormulationKind,
    pub status: Status,
    pub objective: f64,
    pub best_bound: f64,
    pub horizon: usize,
    pub time_step_h: f64,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub constraints: usize,
    pub variables: usize,
    pub binaries: usize,
    pub nonzeros: usize,
    pub iterations: usize,
    pub nodes: usize,
    pub residuals: Residuals,
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

impl DispatchSummary {
    pub fn new(model: &DispatchModel, schedule: &DispatchSchedule, residuals: Residuals, build_seconds: f64) -> Self {
        DispatchSummary {
            case: schedule.case_name.clone(),
            formulation: schedule.formulation,
            status: schedule.status,
            objective: schedule.objective,
            best_bound: schedule.best_bound,
            horizon: schedule.horizon(),
            time_step_h: schedule.time_step_h,
            build_seconds,
            solve_seconds: schedule.stats.solve_seconds,
            constraints: schedule.stats.constraints,
            variables: schedule.stats.variables,
            binaries: schedule.stats.binaries,
            nonzeros: schedule.stats.nonzeros,
            iterations: schedule.stats.iterations,
            nodes: schedule.stats.nodes,
            residuals,
            metadata: model.metadata.clone(),
            provenance: serde_json::Value::Null,
        }
    }
}

fn writer(path: &Path, header: &[String]) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for line in header {
        writeln!(out, "# {line}").map_err(io)?;
    }
    Ok(csv::Writer::from_writer(out))
}

fn table(path: &Path, header: &[String], columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path, header)?;
    let err = |e: csv::Error| Error::parse(path, e);
    let mut head = vec!["t".to_string()];
    head.extend(columns.iter().cloned());
    w.write_record(&head).map_err(err)?;
    for (t, row) in rows.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One CSV per entity class plus the full schedule as JSON; returns the
/// written paths. `provenance`, when given, is added to the JSON.
pub fn write_schedule(
    dir: &Path,
    case: &NetworkCase,
    schedule: &DispatchSchedule,
    header: &[String],
    provenance: Option<&serde_json::Value>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, columns: Vec<String>, rows: &[Vec<f64>]| -> Result<()> {
        let path = dir.join(name);
        table(&path, header, &columns, rows)?;
        written.push(path);
        Ok(())
    };
    let gens = case
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| format!("pg{g}_node{}_W", case.nodes[gen.node].id))
        .collect();
    emit("generation.csv", gens, &schedule.generation)?;
    let lines = case
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| format!("f{l}_{}-{}_W", case.nodes[line.from].id, case.nodes[line.to].id))
        .collect();
    emit("flows.csv", lines, &schedule.flow)?;
    let nodes: Vec<String> = case.nodes.iter().map(|n| format!("delta_node{}_rad", n.id)).collect();
    emit("angles.csv", nodes.clone(), &schedule.angle)?;
    if !schedule.shed.is_empty() {
        emit("shed.csv", nodes, &schedule.shed)?;
    }
    for (s, b) in schedule.batteries.iter().enumerate() {
        let cols = ["p_dis_W", "p_cha_W", "p_out_W", "p_in_W", "e_Wh", "soc"].map(String::from).to_vec();
        let rows: Vec<Vec<f64>> = (0..schedule.horizon())
            .map(|t| vec![b.p_dis[t], b.p_cha[t], b.p_out[t], b.p_in[t], b.energy[t], b.soc[t]])
            .collect();
        emit(&format!("battery_{s}.csv"), cols, &rows)?;
        if let (Some(d), Some(c)) = (b.dis_weights.first(), b.cha_weights.first()) {
            let mut cols: Vec<String> = (0..d.len()).map(|j| format!("dis_{j}")).collect();
            cols.extend((0..c.len()).map(|k| format!("cha_{k}")));
            let rows: Vec<Vec<f64>> = b
                .dis_weights
                .iter()
                .zip(&b.cha_weights)
                .map(|(d, c)| d.iter().chain(c).copied().collect())
                .collect();
            emit(&format!("weights_{s}.csv"), cols, &rows)?;
        }
    }
    let path = dir.join("schedule.json");
    let mut value = serde_json::to_value(schedule).expect("schedule serializes");
    if let (Some(p), Some(obj)) = (provenance, value.as_object_mut()) {
        obj.insert("provenance".into(), p.clone());
    }
    write_json(&path, &value)?;
    written.push(path);
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
