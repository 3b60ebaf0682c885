use serde::{Deserialize, Serialize};

use crate::electrochem::{BatteryParams, DiffusionPath};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Charge,
    Discharge,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Discharge, Mode::Charge];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Charge => "charge",
            Mode::Discharge => "discharge",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One side of the current limits: the surface-SOC root, the C-rate cap and
/// the binding minimum of the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentLimit {
    pub root: f64,
    pub cap: f64,
    pub limit: f64,
}

impl CurrentLimit {
    pub fn is_capped(&self) -> bool {
        self.cap < self.root
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentLimits {
    pub i_max_dis_0: f64,
    pub i_max_cha_0: f64,
    pub i_max_dis: f64,
    pub i_max_cha: f64,
}

/// Maximum terminal power; `cutoff` marks a discharge limit that would need a
/// negative terminal voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLimit {
    pub watts: f64,
    pub current: f64,
    pub cutoff: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerConversion {
    pub current: f64,
    pub p_internal: f64,
}

/// Smallest nonnegative root of `a x^2 + b x + c`.
fn smallest_nonnegative_root(mode: Mode, soc: f64, a: f64, b: f64, c: f64) -> Result<f64> {
    let fail = |disc: f64| Error::NoRealRoot {
        mode: mode.as_str(),
        soc,
        a,
        b,
        c,
        discriminant: disc,
    };
    if a == 0.0 {
        if b == 0.0 {
            return if c == 0.0 { Ok(0.0) } else { Err(fail(f64::NAN)) };
        }
        let r = -c / b;
        return if r >= 0.0 { Ok(r) } else { Err(fail(f64::NAN)) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(fail(disc));
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut best = f64::INFINITY;
    for r in [q / a, if q != 0.0 { c / q } else { f64::NAN }] {
        if r >= 0.0 && r < best {
            best = r;
        }
    }
    if best.is_finite() {
        Ok(best + 0.0)
    } else {
        Err(fail(disc))
    }
}

fn check_soc(soc: f64) -> Result<()> {
    if (0.0..=1.0).contains(&soc) {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "soc",
            value: soc,
            domain: "[0, 1]",
        })
    }
}

/// Discharge current at which the surface SOC reaches 0, capped by the
/// discharge C-rate.
pub fn max_discharge_current(params: &BatteryParams, soc: f64, temperature: f64) -> Result<CurrentLimit> {
    check_soc(soc)?;
    let r_e = params.diffusion_resistance(temperature, DiffusionPath::Electrode)?;
    let a = -r_e * params.eta_ci;
    let b = -r_e * (params.eta_c0 + params.eta_ct * temperature);
    let root = smallest_nonnegative_root(Mode::Discharge, soc, a, b, soc)?;
    let cap = params.c_rate_dis * params.nominal_current();
    Ok(CurrentLimit {
        root,
        cap,
        limit: root.min(cap),
    })
}

/// Charge current at which the surface SOC reaches 1, capped by the charge
/// C-rate.
pub fn max_charge_current(params: &BatteryParams, soc: f64, temperature: f64) -> Result<CurrentLimit> {
    check_soc(soc)?;
    let r_e = params.diffusion_resistance(temperature, DiffusionPath::Electrode)?;
    let a = r_e * params.eta_ci;
    let b = r_e * (params.eta_c0 + params.eta_ct * temperature);
    let root = smallest_nonnegative_root(Mode::Charge, soc, a, b, soc - 1.0)?;
    let cap = params.c_rate_cha * params.nominal_current();
    Ok(CurrentLimit {
        root,
        cap,
        limit: root.min(cap),
    })
}

pub fn max_current(params: &BatteryParams, soc: f64, temperature: f64, mode: Mode) -> Result<CurrentLimit> {
    match mode {
        Mode::Discharge => max_discharge_current(params, soc, temperature),
        Mode::Charge => max_charge_current(params, soc, temperature),
    }
}

pub fn current_limits(params: &BatteryParams, soc: f64, temperature: f64) -> Result<CurrentLimits> {
    let d = max_discharge_current(params, soc, temperature)?;
    let c = max_charge_current(params, soc, temperature)?;
    Ok(CurrentLimits {
        i_max_dis_0: d.root,
        i_max_cha_0: c.root,
        i_max_dis: d.limit,
        i_max_cha: c.limit,
    })
}

pub fn max_power(params: &BatteryParams, soc: f64, temperature: f64, mode: Mode) -> Result<PowerLimit> {
    let i = max_current(params, soc, temperature, mode)?.limit;
    let v = params.equilibrium_voltage(soc, temperature)?;
    let r = params.total_resistance(soc, temperature)?;
    Ok(match mode {
        Mode::Discharge => {
            let p = v * i - i * i * r;
            if p < 0.0 {
                PowerLimit {
                    watts: 0.0,
                    current: i,
                    cutoff: true,
                }
            } else {
                PowerLimit {
                    watts: p,
                    current: i,
                    cutoff: false,
                }
            }
        }
        Mode::Charge => PowerLimit {
            watts: v * i + i * i * r,
            current: i,
            cutoff: false,
        },
    })
}

/// Ratio of delivered to drawn power at terminal current `current`.
pub fn efficiency(params: &BatteryParams, soc: f64, current: f64, temperature: f64, mode: Mode) -> Result<f64> {
    let limit = max_current(params, soc, temperature, mode)?.limit;
    if !(current >= 0.0) || current > limit * (1.0 + 1e-12) {
        return Err(Error::Domain {
            quantity: "current",
            value: current,
            domain: "[0, current limit]",
        });
    }
    let v = params.equilibrium_voltage(soc, temperature)?;
    if v <= 0.0 {
        return Err(Error::Domain {
            quantity: "equilibrium voltage",
            value: v,
            domain: "(0, inf) V",
        });
    }
    let r = params.total_resistance(soc, temperature)?;
    Ok(match mode {
        Mode::Discharge => 1.0 - current * r / v,
        Mode::Charge => v / (v + current * r),
    })
}

/// Current and internal power behind a terminal power request.
pub fn terminal_to_internal(
    params: &BatteryParams,
    soc: f64,
    p_terminal: f64,
    temperature: f64,
    mode: Mode,
) -> Result<PowerConversion> {
    let limit = max_power(params, soc, temperature, mode)?.watts;
    if !(p_terminal >= 0.0) || p_terminal > limit * (1.0 + 1e-12) {
        return Err(Error::InfeasiblePower {
            mode: mode.as_str(),
            soc,
            requested: p_terminal,
            limit,
        });
    }
    convert_unchecked(params, soc, p_terminal, temperature, mode)
}

/// The circuit relation without the limit check; the discharge branch still
/// needs `p_terminal <= v^2 / (4 R)`.
pub(crate) fn convert_unchecked(
    params: &BatteryParams,
    soc: f64,
    p_terminal: f64,
    temperature: f64,
    mode: Mode,
) -> Result<PowerConversion> {
    if p_terminal == 0.0 {
        return Ok(PowerConversion {
            current: 0.0,
            p_internal: 0.0,
        });
    }
    let v = params.equilibrium_voltage(soc, temperature)?;
    let r = params.total_resistance(soc, temperature)?;
    let current = match mode {
        Mode::Discharge => {
            let disc = v * v - 4.0 * r * p_terminal;
            if disc < 0.0 {
                return Err(Error::InfeasiblePower {
                    mode: mode.as_str(),
                    soc,
                    requested: p_terminal,
                    limit: v * v / (4.0 * r),
                });
            }
            2.0 * p_terminal / (v + disc.sqrt())
        }
        Mode::Charge => 2.0 * p_terminal / (v + (v * v + 4.0 * r * p_terminal).sqrt()),
    };
    Ok(PowerConversion {
        current,
        p_internal: v * current,
    })
}
