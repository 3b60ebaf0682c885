use std::path::PathBuf;

use battdispatch_core::dispatch::{make_testcase, TestCaseKind, TestCaseSpec};
use clap::Args;
use log::info;
use serde::Serialize;

use crate::characterize::load_battery;
use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

#[derive(Debug, Args, Serialize)]
pub struct TestCaseArgs {
    /// Output directory for case.json, demand.csv and battery_0.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Deeper load peaks and a cold battery starting at 20 % energy.
    #[arg(long)]
    pub stressed: bool,
    /// Number of time steps.
    #[arg(long, default_value_t = 144)]
    pub steps: usize,
    /// Step length in hours.
    #[arg(long, default_value_t = 1.0 / 6.0)]
    pub time_step_h: f64,
    /// Battery parameter file; the built-in synthetic cell when omitted.
    #[arg(long)]
    pub battery: Option<PathBuf>,
}

pub fn run(args: &TestCaseArgs) -> CliResult<()> {
    if args.steps == 0 || !(args.time_step_h > 0.0 && args.time_step_h.is_finite()) {
        return Err(CliError::Usage("--steps and --time-step-h must be positive".into()));
    }
    let mut prov = Provenance::new("make-testcase", args);
    let kind = if args.stressed {
        TestCaseKind::Stressed
    } else {
        TestCaseKind::Base
    };
    let mut spec = TestCaseSpec::new(kind);
    spec.steps = args.steps;
    spec.time_step_h = args.time_step_h;
    spec.battery = load_battery(args.battery.as_deref(), &mut prov)?;
    let case = make_testcase(&spec);
    let mut header = vec![format!(
        "synthetic {} case scaled from the public 24-bus reliability test system; not measured data",
        case.name
    )];
    header.extend(prov.header());
    let path = case.save(&args.out, &header, Some(prov.to_value()))?;
    info!("wrote {}", path.display());
    Ok(())
}
