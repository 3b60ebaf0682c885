use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use battdispatch_core::characterization::{write_csv_with_header, SamplingGrid};
use battdispatch_core::dispatch::{
    build_dispatch, schedule_from_primal, solve_dispatch, verify_schedule, write_schedule, BatteryModel,
    BuildOptions, DispatchModel, DispatchOptions, DispatchSummary, TriangleGrid,
};
use battdispatch_core::optim::{export_mps, read_solution_csv, MilpOptions};
use battdispatch_core::{BatteryFormulation, BatteryParams, FormulationKind, Mode, NetworkCase};
use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::provenance::{write_json_with, Provenance};

/// MILP horizon used when `--horizon` is not given.
pub const MILP_DEFAULT_HORIZON: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispatchMode {
    Ideal,
    Envelope,
    Milp,
}

impl DispatchMode {
    pub fn dir_name(self) -> &'static str {
        match self {
            DispatchMode::Ideal => "ideal",
            DispatchMode::Envelope => "envelope",
            DispatchMode::Milp => "milp",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DispatchArgs {
    /// Case directory or case.json file.
    #[arg(long)]
    pub case: PathBuf,
    /// Formulations to solve, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "ideal,envelope")]
    pub mode: Vec<DispatchMode>,
    /// Output directory; each mode writes to <out>/<mode>/.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Battery parameter file replacing every battery's parameters.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// Number of leading time steps to keep. MILP runs default to 24.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Allow load shedding at this cost per Wh.
    #[arg(long)]
    pub shed_penalty: Option<f64>,
    /// Write model.mps for each mode and stop without solving.
    #[arg(long)]
    pub export_mps: bool,
    /// Take the primal solution from an external solver's name,value CSV
    /// instead of solving.
    #[arg(long, conflicts_with = "export_mps")]
    pub import_solution: Option<PathBuf>,
    /// Absolute primal feasibility tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub feasibility_tol: f64,
    /// Integrality tolerance for binaries.
    #[arg(long, default_value_t = 1e-6)]
    pub integrality_tol: f64,
    /// Branch-and-bound node limit.
    #[arg(long, default_value_t = 100_000)]
    pub node_limit: usize,
    /// Simplex iteration limit per LP.
    #[arg(long, default_value_t = 2_000_000)]
    pub max_iterations: usize,
    /// Largest post-solve residual accepted.
    #[arg(long, default_value_t = 1e-5)]
    pub verify_tol: f64,
    /// Charging efficiency of the ideal model.
    #[arg(long)]
    pub eta_cha: Option<f64>,
    /// Discharging efficiency of the ideal model.
    #[arg(long)]
    pub eta_dis: Option<f64>,
    /// Envelope SOC breakpoints for both modes.
    #[arg(long, value_delimiter = ',')]
    pub soc_grid: Option<Vec<f64>>,
    /// Envelope power levels as fractions of the maximum power.
    #[arg(long, value_delimiter = ',')]
    pub power_grid: Option<Vec<f64>>,
    /// Triangle-method SOC breakpoints.
    #[arg(long, value_delimiter = ',')]
    pub tri_soc_grid: Option<Vec<f64>>,
    /// Triangle-method power fractions.
    #[arg(long, value_delimiter = ',')]
    pub tri_power_grid: Option<Vec<f64>>,
    /// Number of modes solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl DispatchArgs {
    fn options(&self) -> DispatchOptions {
        let mut milp = MilpOptions::default();
        milp.lp.tolerances.feasibility = self.feasibility_tol;
        milp.lp.tolerances.integrality = self.integrality_tol;
        milp.lp.max_iterations = self.max_iterations;
        milp.node_limit = self.node_limit;
        DispatchOptions {
            milp,
            verify_tolerance: self.verify_tol,
        }
    }

    fn check(&self) -> CliResult<()> {
        let mut issues = Vec::new();
        if self.mode.is_empty() {
            issues.push("at least one --mode is required".to_string());
        }
        let mut seen = self.mode.clone();
        seen.sort_by_key(|m| m.dir_name());
        seen.dedup();
        if seen.len() != self.mode.len() {
            issues.push("--mode lists a formulation twice".to_string());
        }
        if self.import_solution.is_some() && self.mode.len() != 1 {
            issues.push("--import-solution needs exactly one --mode".to_string());
        }
        for (name, eta) in [("--eta-cha", self.eta_cha), ("--eta-dis", self.eta_dis)] {
            if let Some(e) = eta {
                if !(e > 0.0 && e <= 1.0) {
                    issues.push(format!("{name} must lie in (0, 1], got {e}"));
                }
            }
        }
        if let Some(p) = self.shed_penalty {
            if !(p >= 0.0 && p.is_finite()) {
                issues.push(format!("--shed-penalty must be nonnegative, got {p}"));
            }
        }
        if self.horizon == Some(0) {
            issues.push("--horizon must be positive".to_string());
        }
        if self.jobs == 0 {
            issues.push("--jobs must be positive".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(issues.join("; ")))
        }
    }
}

pub fn case_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("case.json")
    } else {
        path.to_path_buf()
    }
}

/// Case plus the parameter files it references, hashed into `prov`.
fn load_case(args: &DispatchArgs, prov: &mut Provenance) -> CliResult<NetworkCase> {
    let file = case_file(&args.case);
    prov.hash_input(&file)?;
    let mut case = NetworkCase::load(&file)?;
    let dir = file.parent().unwrap_or(Path::new("."));
    let demand = dir.join("demand.csv");
    if demand.is_file() {
        prov.hash_input(&demand)?;
    }
    for s in 0..case.batteries.len() {
        let p = dir.join(format!("battery_{s}.json"));
        if p.is_file() {
            prov.hash_input(&p)?;
        }
    }
    if let Some(path) = &args.battery {
        prov.hash_input(path)?;
        let params = BatteryParams::load(path)?;
        for site in &mut case.batteries {
            site.params = params.clone();
        }
    }
    Ok(case)
}

fn formulation(args: &DispatchArgs, mode: DispatchMode, params: &BatteryParams, temperature: f64) -> CliResult<BatteryFormulation> {
    let mut f = match mode {
        DispatchMode::Ideal => BatteryFormulation::ideal(params),
        DispatchMode::Envelope => {
            let grid = |mode: Mode| {
                let mut g = SamplingGrid::default_for(mode);
                if let Some(s) = &args.soc_grid {
                    g.soc = s.clone();
                }
                if let Some(p) = &args.power_grid {
                    g.power_fraction = p.clone();
                }
                g
            };
            BatteryFormulation::envelope_with(params, temperature, &grid(Mode::Discharge), &grid(Mode::Charge))?
        }
        DispatchMode::Milp => match (&args.tri_soc_grid, &args.tri_power_grid) {
            (None, None) => BatteryFormulation::triangle(params, temperature)?,
            (soc, frac) => {
                let soc = soc.clone().unwrap_or_else(|| TriangleGrid::DEFAULT_SOC.to_vec());
                let frac = frac.clone().unwrap_or_else(|| TriangleGrid::DEFAULT_FRACTION.to_vec());
                BatteryFormulation {
                    energy_capacity_wh: params.energy_capacity_wh,
                    model: BatteryModel::Triangle {
                        discharge: TriangleGrid::sample(params, Mode::Discharge, &soc, &frac, temperature)?,
                        charge: TriangleGrid::sample(params, Mode::Charge, &soc, &frac, temperature)?,
                    },
                }
            }
        },
    };
    if let BatteryModel::Ideal(ideal) = &mut f.model {
        if let Some(e) = args.eta_cha {
            ideal.eta_cha = e;
        }
        if let Some(e) = args.eta_dis {
            ideal.eta_dis = e;
        }
    }
    Ok(f)
}

/// One row of the cross-mode results table.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub mode: String,
    pub status: String,
    pub objective: f64,
    pub best_bound: f64,
    pub horizon: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub constraints: usize,
    pub variables: usize,
    pub binaries: usize,
    pub nonzeros: usize,
    pub iterations: usize,
    pub nodes: usize,
    pub worst_residual: f64,
}

fn run_mode(args: &DispatchArgs, case: &NetworkCase, mode: DispatchMode, prov: &Provenance) -> CliResult<Option<SummaryRow>> {
    let horizon = match (args.horizon, mode) {
        (Some(h), _) => h,
        (None, DispatchMode::Milp) => {
            if case.horizon() > MILP_DEFAULT_HORIZON {
                warn!(
                    "milp: solving the first {MILP_DEFAULT_HORIZON} of {} steps; pass --horizon to change",
                    case.horizon()
                );
            }
            MILP_DEFAULT_HORIZON
        }
        (None, _) => case.horizon(),
    };
    if horizon > case.horizon() {
        return Err(CliError::Usage(format!(
            "--horizon {horizon} exceeds the case's {} steps",
            case.horizon()
        )));
    }
    let case = case.truncated(horizon);
    let dir = args.out.join(mode.dir_name());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let start = Instant::now();
    let formulations = case
        .batteries
        .iter()
        .map(|b| formulation(args, mode, &b.params, b.temperature))
        .collect::<CliResult<Vec<_>>>()?;
    let build = BuildOptions {
        shed_penalty_per_wh: args.shed_penalty,
    };
    let model = build_dispatch(&case, &formulations, &build)?;
    let build_seconds = start.elapsed().as_secs_f64();
    info!(
        "{}: {} rows, {} columns, {} binaries built in {build_seconds:.3} s",
        mode.dir_name(),
        model.program.lp.num_constraints(),
        model.program.lp.num_variables(),
        model.program.binaries().len()
    );

    if args.export_mps {
        let path = dir.join("model.mps");
        export_mps(&model.program, &path)?;
        write_json_with(&dir.join("model.json"), model_info(&model, build_seconds), prov)?;
        info!("wrote {}", path.display());
        return Ok(None);
    }

    let opts = args.options();
    let schedule = match &args.import_solution {
        Some(path) => {
            let primal = read_solution_csv(&model.program.lp, path)?;
            schedule_from_primal(&case, &model, primal, &opts)?
        }
        None => solve_dispatch(&case, &model, &opts)?,
    };
    let residuals = verify_schedule(&case, &model, &schedule);
    let worst = residuals.worst().1;
    let mut summary = DispatchSummary::new(&model, &schedule, residuals, build_seconds);
    summary.provenance = prov.to_value();

    let header = prov.header();
    write_schedule(&dir, &case, &schedule, &header, Some(&summary.provenance))?;
    for (s, site) in case.batteries.iter().enumerate() {
        site.params.save(dir.join(format!("battery_{s}.json")))?;
    }
    battdispatch_core::dispatch::write_json(&dir.join("summary.json"), &summary)?;
    info!(
        "{}: objective {:.6} ({}) in {:.3} s",
        mode.dir_name(),
        schedule.objective,
        schedule.status,
        schedule.stats.solve_seconds
    );
    Ok(Some(SummaryRow {
        mode: mode.dir_name().into(),
        status: schedule.status.to_string(),
        objective: schedule.objective,
        best_bound: schedule.best_bound,
        horizon,
        build_seconds,
        solve_seconds: schedule.stats.solve_seconds,
        constraints: summary.constraints,
        variables: summary.variables,
        binaries: summary.binaries,
        nonzeros: summary.nonzeros,
        iterations: summary.iterations,
        nodes: summary.nodes,
        worst_residual: worst,
    }))
}

#[derive(Serialize)]
struct ModelInfo<'a> {
    formulation: FormulationKind,
    horizon: usize,
    constraints: usize,
    variables: usize,
    binaries: usize,
    nonzeros: usize,
    build_seconds: f64,
    base_power_w: f64,
    metadata: &'a std::collections::BTreeMap<String, String>,
}

fn model_info(model: &DispatchModel, build_seconds: f64) -> ModelInfo<'_> {
    ModelInfo {
        formulation: model.kind,
        horizon: model.horizon(),
        constraints: model.program.lp.num_constraints(),
        variables: model.program.lp.num_variables(),
        binaries: model.program.binaries().len(),
        nonzeros: model.program.lp.num_nonzeros(),
        build_seconds,
        base_power_w: model.base_power_w,
        metadata: &model.metadata,
    }
}

/// Runs `f` over `items` on at most `jobs` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                results.lock().expect("no poisoned lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned lock")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

pub fn run(args: &DispatchArgs) -> CliResult<()> {
    args.check()?;
    let mut prov = Provenance::new("dispatch", args);
    let case = load_case(args, &mut prov)?;
    if let Some(p) = &args.import_solution {
        prov.hash_input(p)?;
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let results = parallel_map(&args.mode, args.jobs, |&mode| {
        run_mode(args, &case, mode, &prov).map_err(|e| {
            log::error!("{}: {e}", mode.dir_name());
            e
        })
    });
    let total = results.len();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(Some(row)) => rows.push(row),
            Ok(None) => {}
            Err(e) => errors.push(e),
        }
    }
    if !rows.is_empty() {
        write_csv_with_header(&args.out.join("summary.csv"), &prov.header(), &rows)?;
    }
    match errors.len() {
        0 => Ok(()),
        1 if total == 1 => Err(errors.pop().expect("one error")),
        failed => Err(CliError::Batch {
            failed,
            total,
            first: Box::new(errors.swap_remove(0)),
        }),
    }
}
