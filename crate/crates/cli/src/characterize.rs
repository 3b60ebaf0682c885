use std::path::{Path, PathBuf};

use battdispatch_core::characterization::{
    envelope_points, max_current, max_power, sample_surface, surface_table, write_csv_with_header, ErrorReport, EvaluationGrid,
    SamplingGrid,
};
use battdispatch_core::{BatteryParams, Mode};
use clap::Args;
use log::info;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::provenance::{write_json_with, Provenance};

#[derive(Debug, Args, Serialize)]
pub struct CharacterizeArgs {
    /// Battery parameter file; the built-in synthetic cell when omitted.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Cell temperature in K; the file's reference temperature by default.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// SOC breakpoints for both modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub soc_grid: Option<Vec<f64>>,
    /// Discharge SOC breakpoints; overrides --soc-grid.
    #[arg(long, value_delimiter = ',')]
    pub soc_grid_dis: Option<Vec<f64>>,
    /// Charge SOC breakpoints; overrides --soc-grid.
    #[arg(long, value_delimiter = ',')]
    pub soc_grid_cha: Option<Vec<f64>>,
    /// Power levels as fractions of the maximum power, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub power_grid: Option<Vec<f64>>,
    /// SOC points of the error evaluation grid.
    #[arg(long, default_value_t = 100)]
    pub eval_soc_points: usize,
    /// Power points per SOC of the error evaluation grid.
    #[arg(long, default_value_t = 100)]
    pub eval_power_points: usize,
    /// SOC points of the dense surface tables.
    #[arg(long, default_value_t = 51)]
    pub surface_soc_points: usize,
    /// Power points per SOC of the dense surface tables.
    #[arg(long, default_value_t = 50)]
    pub surface_power_points: usize,
}

impl CharacterizeArgs {
    fn grid(&self, mode: Mode) -> SamplingGrid {
        let mut grid = SamplingGrid::default_for(mode);
        let soc = match mode {
            Mode::Discharge => self.soc_grid_dis.as_ref(),
            Mode::Charge => self.soc_grid_cha.as_ref(),
        }
        .or(self.soc_grid.as_ref());
        if let Some(soc) = soc {
            grid.soc = soc.clone();
        }
        if let Some(p) = &self.power_grid {
            grid.power_fraction = p.clone();
        }
        grid
    }
}

#[derive(Serialize)]
struct LimitRow {
    soc: f64,
    i_max_dis_c: f64,
    i_max_cha_c: f64,
    p_max_dis_w: f64,
    p_max_cha_w: f64,
    dis_rate_capped: bool,
    cha_rate_capped: bool,
    dis_voltage_cutoff: bool,
}

#[derive(Serialize)]
struct ErrorRow {
    soc: f64,
    p_terminal_w: f64,
    p_internal_exact_w: f64,
    p_internal_envelope_w: Option<f64>,
    relative_error: Option<f64>,
}

#[derive(Serialize)]
struct ErrorReports {
    discharge: ErrorReport,
    charge: ErrorReport,
}

pub fn load_battery(path: Option<&Path>, provenance: &mut Provenance) -> CliResult<BatteryParams> {
    match path {
        Some(p) => {
            provenance.hash_input(p)?;
            Ok(BatteryParams::load(p)?)
        }
        None => {
            let params = BatteryParams::synthetic_default();
            provenance.hash_text("builtin:synthetic-battery", &serde_json::to_string(&params).expect("serializes"));
            Ok(params)
        }
    }
}

pub fn run(args: &CharacterizeArgs) -> CliResult<()> {
    let mut prov = Provenance::new("characterize", args);
    let params = load_battery(args.battery.as_deref(), &mut prov)?;
    let temperature = args.temperature.unwrap_or(params.t_ref);
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(CliError::Usage(format!("temperature must be positive, got {temperature}")));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let header = prov.header();
    let eval = EvaluationGrid {
        soc_points: args.eval_soc_points,
        power_points: args.eval_power_points,
    };

    let mut reports = Vec::new();
    for mode in [Mode::Discharge, Mode::Charge] {
        let name = mode.as_str();
        let mut set = sample_surface(&params, mode, &args.grid(mode), temperature)?;
        set.provenance.run = Some(prov.to_value());
        set.save(args.out.join(format!("envelope_{name}.json")))?;
        info!("{name} envelope: {} samples", set.samples.len());

        let points = envelope_points(&set, &params, temperature, &eval)?;
        let rows: Vec<ErrorRow> = points
            .iter()
            .map(|p| ErrorRow {
                soc: p.soc,
                p_terminal_w: p.p_terminal,
                p_internal_exact_w: p.exact,
                p_internal_envelope_w: p.envelope,
                relative_error: p.relative(),
            })
            .collect();
        write_csv_with_header(&args.out.join(format!("error_points_{name}.csv")), &header, &rows)?;
        let report = ErrorReport::from_points(mode, &points, &eval.describe());
        info!(
            "{name}: mean relative error {:.4} %, max {:.4} %",
            100.0 * report.mean_rel_error,
            100.0 * report.max_rel_error
        );
        reports.push(report);

        let surface = surface_table(
            &params,
            mode,
            args.surface_soc_points,
            args.surface_power_points,
            temperature,
        )?;
        write_csv_with_header(&args.out.join(format!("surface_{name}.csv")), &header, &surface)?;
    }
    let charge = reports.pop().expect("two reports");
    let discharge = reports.pop().expect("two reports");
    write_json_with(&args.out.join("error_report.json"), ErrorReports { discharge, charge }, &prov)?;

    let n = args.surface_soc_points.max(2);
    let capacity = params.nominal_current();
    let mut limits = Vec::with_capacity(n);
    for k in 0..n {
        let soc = k as f64 / (n - 1) as f64;
        let dis = max_power(&params, soc, temperature, Mode::Discharge)?;
        let cha = max_power(&params, soc, temperature, Mode::Charge)?;
        limits.push(LimitRow {
            soc,
            i_max_dis_c: dis.current / capacity,
            i_max_cha_c: cha.current / capacity,
            p_max_dis_w: dis.watts,
            p_max_cha_w: cha.watts,
            dis_rate_capped: max_current(&params, soc, temperature, Mode::Discharge)?.is_capped(),
            cha_rate_capped: max_current(&params, soc, temperature, Mode::Charge)?.is_capped(),
            dis_voltage_cutoff: dis.cutoff,
        });
    }
    write_csv_with_header(&args.out.join("limits.csv"), &header, &limits)?;
    Ok(())
}
