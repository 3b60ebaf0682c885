use std::path::{Path, PathBuf};

use battdispatch_core::characterization::write_csv_with_header;
use battdispatch_core::reliability::assess;
use battdispatch_core::{BatteryParams, DispatchSchedule};
use clap::Args;
use log::info;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::provenance::{write_json_with, Provenance};

#[derive(Debug, Args, Serialize)]
pub struct ReliabilityArgs {
    /// Directory written by `dispatch` for one mode, or its schedule.json.
    #[arg(long)]
    pub schedule: PathBuf,
    /// Battery parameter file used for every battery instead of the copies
    /// stored next to the schedule.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// Output directory; the schedule directory by default.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportRow {
    battery: usize,
    formulation: String,
    temperature_k: f64,
    steps: usize,
    clipped_steps: usize,
    max_violation_w: f64,
    imbalance_wh: f64,
    imbalance_fraction: f64,
    negative_energy_steps: usize,
}

pub fn run(args: &ReliabilityArgs) -> CliResult<()> {
    let mut prov = Provenance::new("reliability", args);
    let (dir, file) = if args.schedule.is_dir() {
        (args.schedule.clone(), args.schedule.join("schedule.json"))
    } else {
        let dir = args.schedule.parent().unwrap_or(Path::new(".")).to_path_buf();
        (dir, args.schedule.clone())
    };
    prov.hash_input(&file)?;
    let schedule = DispatchSchedule::load(&file)?;
    let params = match &args.battery {
        Some(path) => {
            prov.hash_input(path)?;
            vec![BatteryParams::load(path)?; schedule.batteries.len()]
        }
        None => (0..schedule.batteries.len())
            .map(|s| {
                let path = dir.join(format!("battery_{s}.json"));
                prov.hash_input(&path)?;
                Ok(BatteryParams::load(&path)?)
            })
            .collect::<CliResult<Vec<_>>>()?,
    };
    let reports = assess(&schedule, &params)?;

    let out = args.out.clone().unwrap_or(dir);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let header = prov.header();
    let mut rows = Vec::new();
    for r in &reports {
        write_json_with(&out.join(format!("realization_{}.json", r.battery)), r, &prov)?;
        r.write_csv(&out.join(format!("realization_{}.csv", r.battery)), &header)?;
        info!(
            "battery {}: {} clipped steps, imbalance {:.3} Wh ({:.4} %)",
            r.battery,
            r.clipped_steps,
            r.imbalance_wh,
            100.0 * r.imbalance_fraction
        );
        rows.push(ReportRow {
            battery: r.battery,
            formulation: r.formulation.as_str().into(),
            temperature_k: r.temperature,
            steps: r.e_sched.len(),
            clipped_steps: r.clipped_steps,
            max_violation_w: r.max_violation,
            imbalance_wh: r.imbalance_wh,
            imbalance_fraction: r.imbalance_fraction,
            negative_energy_steps: r.negative_energy_steps,
        });
    }
    write_csv_with_header(&out.join("reliability.csv"), &header, &rows)?;
    Ok(())
}
