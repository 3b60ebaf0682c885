//! Open-loop realization of a battery schedule under the nonlinear model:
//! clip requests to the attainable power, propagate the energy, and measure
//! the gap to the scheduled trajectory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::characterization::{max_power, terminal_to_internal, write_csv_with_header, Mode};
use crate::dispatch::{BatterySchedule, DispatchSchedule, FormulationKind};
use crate::electrochem::BatteryParams;
use crate::error::{Error, Result};

pub const SIGN_CONVENTION: &str = "imbalance = sum_t (e_real_t - e_sched_t); negative means less stored energy than scheduled";

/// Power requests after clipping to the limits at the realized SOC.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClippedPowers {
    #[serde(rename = "p_dis_W")]
    pub p_dis: Vec<f64>,
    #[serde(rename = "p_cha_W")]
    pub p_cha: Vec<f64>,
    /// Requested minus delivered power, summed over both modes.
    #[serde(rename = "violation_W")]
    pub violation: Vec<f64>,
}

impl ClippedPowers {
    pub fn clipped_steps(&self) -> usize {
        self.violation.iter().filter(|v| **v > 0.0).count()
    }
}

/// The SOC at which limits and efficiencies are evaluated; realized
/// energy may leave [0, capacity] but the cell model may not.
fn model_soc(energy: f64, capacity: f64) -> f64 {
    if capacity > 0.0 {
        (energy / capacity).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Energy after one step of `(p_dis, p_cha)` terminal power from `energy`.
fn step(params: &BatteryParams, energy: f64, capacity: f64, p_dis: f64, p_cha: f64, temperature: f64, dt: f64) -> Result<f64> {
    let soc = model_soc(energy, capacity);
    let mut next = energy;
    if p_cha > 0.0 {
        next += terminal_to_internal(params, soc, p_cha, temperature, Mode::Charge)?.p_internal * dt;
    }
    if p_dis > 0.0 {
        next -= terminal_to_internal(params, soc, p_dis, temperature, Mode::Discharge)?.p_internal * dt;
    }
    Ok(next)
}

/// Replaces each request above the attainable power at the realized SOC
/// with that power, stepping the realized energy forward as it goes.
pub fn clip_to_limits(battery: &BatterySchedule, params: &BatteryParams, temperature: f64, dt: f64) -> Result<ClippedPowers> {
    let steps = battery.p_dis.len();
    let capacity = battery.energy_capacity_wh;
    let mut out = ClippedPowers::default();
    let mut energy = battery.initial_energy_wh;
    for t in 0..steps {
        let soc = model_soc(energy, capacity);
        let mut violation = 0.0;
        let mut clip = |requested: f64, mode: Mode| -> Result<f64> {
            let requested = requested.max(0.0);
            if requested == 0.0 {
                return Ok(0.0);
            }
            let limit = max_power(params, soc, temperature, mode)?.watts;
            if requested > limit {
                violation += requested - limit;
                Ok(limit)
            } else {
                Ok(requested)
            }
        };
        let p_dis = clip(battery.p_dis[t], Mode::Discharge)?;
        let p_cha = clip(battery.p_cha[t], Mode::Charge)?;
        energy = step(params, energy, capacity, p_dis, p_cha, temperature, dt)?;
        out.p_dis.push(p_dis);
        out.p_cha.push(p_cha);
        out.violation.push(violation);
    }
    Ok(out)
}

/// Energy at every step when the (already clipped) powers are applied in
/// order from `initial_energy_wh`; the first entry is the initial energy.
pub fn realize_trajectory(
    powers: &ClippedPowers,
    initial_energy_wh: f64,
    energy_capacity_wh: f64,
    params: &BatteryParams,
    temperature: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let steps = powers.p_dis.len();
    let mut out = Vec::with_capacity(steps);
    let mut energy = initial_energy_wh;
    for t in 0..steps {
        out.push(energy);
        energy = step(params, energy, energy_capacity_wh, powers.p_dis[t], powers.p_cha[t], temperature, dt)?;
    }
    Ok(out)
}

/// Signed `sum_t (e_real - e_sched)` and its magnitude over `sum_t e_sched`.
pub fn imbalance(scheduled: &[f64], realized: &[f64]) -> Result<(f64, f64)> {
    if scheduled.len() != realized.len() {
        return Err(Error::Model(format!(
            "trajectory lengths differ: {} scheduled vs {} realized",
            scheduled.len(),
            realized.len()
        )));
    }
    let total: f64 = realized.iter().zip(scheduled).map(|(r, s)| r - s).sum();
    let stored: f64 = scheduled.iter().sum();
    let fraction = if total == 0.0 {
        0.0
    } else if stored > 0.0 {
        total.abs() / stored
    } else {
        f64::INFINITY
    };
    Ok((total, fraction))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationReport {
    pub battery: usize,
    pub formulation: FormulationKind,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    pub time_step_h: f64,
    #[serde(rename = "e_sched_Wh")]
    pub e_sched: Vec<f64>,
    #[serde(rename = "e_real_Wh")]
    pub e_real: Vec<f64>,
    #[serde(rename = "p_cha_sched_W")]
    pub p_cha_sched: Vec<f64>,
    #[serde(rename = "p_dis_sched_W")]
    pub p_dis_sched: Vec<f64>,
    pub clipped: ClippedPowers,
    pub clipped_steps: usize,
    #[serde(rename = "max_violation_W")]
    pub max_violation: f64,
    #[serde(rename = "imbalance_Wh")]
    pub imbalance_wh: f64,
    pub imbalance_fraction: f64,
    pub sign_convention: String,
    pub negative_energy_steps: usize,
    #[serde(rename = "min_energy_Wh")]
    pub min_energy_wh: f64,
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    t: usize,
    e_sched: f64,
    e_real: f64,
    p_cha_sched: f64,
    p_cha_real: f64,
    p_dis_sched: f64,
    p_dis_real: f64,
    #[serde(rename = "violation_W")]
    violation: f64,
}

impl RealizationReport {
    pub fn write_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        let rows: Vec<TrajectoryRow> = (0..self.e_sched.len())
            .map(|t| TrajectoryRow {
                t,
                e_sched: self.e_sched[t],
                e_real: self.e_real[t],
                p_cha_sched: self.p_cha_sched[t],
                p_cha_real: self.clipped.p_cha[t],
                p_dis_sched: self.p_dis_sched[t],
                p_dis_real: self.clipped.p_dis[t],
                violation: self.clipped.violation[t],
            })
            .collect();
        write_csv_with_header(path, header, &rows)
    }
}

/// Runs clipping, realization and the imbalance metric for one battery.
pub fn assess_battery(
    battery: &BatterySchedule,
    index: usize,
    formulation: FormulationKind,
    params: &BatteryParams,
    dt: f64,
) -> Result<RealizationReport> {
    let temperature = battery.temperature;
    let clipped = clip_to_limits(battery, params, temperature, dt)?;
    let e_real = realize_trajectory(
        &clipped,
        battery.initial_energy_wh,
        battery.energy_capacity_wh,
        params,
        temperature,
        dt,
    )?;
    let (imbalance_wh, imbalance_fraction) = imbalance(&battery.energy, &e_real)?;
    Ok(RealizationReport {
        battery: index,
        formulation,
        temperature,
        time_step_h: dt,
        e_sched: battery.energy.clone(),
        p_cha_sched: battery.p_cha.clone(),
        p_dis_sched: battery.p_dis.clone(),
        clipped_steps: clipped.clipped_steps(),
        max_violation: clipped.violation.iter().copied().fold(0.0, f64::max),
        negative_energy_steps: e_real.iter().filter(|e| **e < 0.0).count(),
        min_energy_wh: e_real.iter().copied().fold(f64::INFINITY, f64::min),
        e_real,
        clipped,
        imbalance_wh,
        imbalance_fraction,
        sign_convention: SIGN_CONVENTION.into(),
    })
}

/// One report per battery; `params[s]` describes battery `s`.
pub fn assess(schedule: &DispatchSchedule, params: &[BatteryParams]) -> Result<Vec<RealizationReport>> {
    if params.len() != schedule.batteries.len() {
        return Err(Error::Model(format!(
            "{} parameter sets for {} scheduled batteries",
            params.len(),
            schedule.batteries.len()
        )));
    }
    schedule
        .batteries
        .iter()
        .zip(params)
        .enumerate()
        .map(|(s, (b, p))| assess_battery(b, s, schedule.formulation, p, schedule.time_step_h))
        .collect()
}
