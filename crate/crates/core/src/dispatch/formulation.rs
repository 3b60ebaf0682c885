use serde::{Deserialize, Serialize};

use crate::characterization::{max_power, sample_surface, terminal_to_internal, EnvelopeSample, EnvelopeSet, Mode, SamplingGrid};
use crate::electrochem::BatteryParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationKind {
    Ideal,
    Envelope,
    MilpTriangle,
}

impl FormulationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Ideal => "ideal",
            FormulationKind::Envelope => "envelope",
            FormulationKind::MilpTriangle => "milp-triangle",
        }
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Constant limits and efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealBattery {
    #[serde(rename = "p_max_cha_W")]
    pub p_max_cha: f64,
    #[serde(rename = "p_max_dis_W")]
    pub p_max_dis: f64,
    pub eta_cha: f64,
    pub eta_dis: f64,
}

impl IdealBattery {
    pub const DEFAULT_ETA_CHA: f64 = 0.972;
    pub const DEFAULT_ETA_DIS: f64 = 0.868;

    /// Rated current times rated voltage in each mode.
    pub fn from_params(params: &BatteryParams) -> Self {
        let i = params.nominal_current();
        IdealBattery {
            p_max_cha: params.c_rate_cha * i * params.rated_voltage,
            p_max_dis: params.c_rate_dis * i * params.rated_voltage,
            eta_cha: Self::DEFAULT_ETA_CHA,
            eta_dis: Self::DEFAULT_ETA_DIS,
        }
    }

    fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for (name, eta) in [("eta_cha", self.eta_cha), ("eta_dis", self.eta_dis)] {
            if !(eta > 0.0 && eta <= 1.0) {
                issues.push(format!("{name} must lie in (0, 1], got {eta}"));
            }
        }
        for (name, p) in [("p_max_cha", self.p_max_cha), ("p_max_dis", self.p_max_dis)] {
            if !(p >= 0.0 && p.is_finite()) {
                issues.push(format!("{name} must be finite and nonnegative, got {p}"));
            }
        }
        issues
    }
}

/// Rectangular SOC x power-fraction grid of samples split into triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleGrid {
    pub mode: Mode,
    pub soc: Vec<f64>,
    pub power_fraction: Vec<f64>,
    /// Row-major: vertex `i * power_fraction.len() + j`.
    pub vertices: Vec<EnvelopeSample>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleGrid {
    pub const DEFAULT_SOC: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    pub const DEFAULT_FRACTION: [f64; 3] = [0.0, 0.5, 1.0];

    /// Checks that `vertices` form the grid `soc x power_fraction` and
    /// triangulates it.
    pub fn new(mode: Mode, soc: Vec<f64>, power_fraction: Vec<f64>, vertices: Vec<EnvelopeSample>) -> Result<Self> {
        let triangles = triangle_partition(&soc, &power_fraction)?;
        let np = power_fraction.len();
        if vertices.len() != soc.len() * np {
            return Err(Error::Model(format!(
                "non-rectangular grid: {} vertices for {} x {} breakpoints",
                vertices.len(),
                soc.len(),
                np
            )));
        }
        for (v, s) in vertices.iter().enumerate() {
            if s.soc != soc[v / np] {
                return Err(Error::Model(format!(
                    "non-rectangular grid: vertex {v} has soc {} but its row is at {}",
                    s.soc,
                    soc[v / np]
                )));
            }
        }
        Ok(TriangleGrid {
            mode,
            soc,
            power_fraction,
            vertices,
            triangles,
        })
    }

    /// Samples the exact surface at every grid vertex.
    pub fn sample(params: &BatteryParams, mode: Mode, soc: &[f64], power_fraction: &[f64], temperature: f64) -> Result<Self> {
        let mut vertices = Vec::with_capacity(soc.len() * power_fraction.len());
        for &s in soc {
            let p_max = max_power(params, s, temperature, mode)?.watts;
            for &f in power_fraction {
                let p = f * p_max;
                let conv = terminal_to_internal(params, s, p, temperature, mode).map_err(|e| Error::Sampling {
                    soc: s,
                    fraction: f,
                    source: Box::new(e),
                })?;
                vertices.push(EnvelopeSample {
                    soc: s,
                    p_terminal: p,
                    p_internal: conv.p_internal,
                });
            }
        }
        Self::new(mode, soc.to_vec(), power_fraction.to_vec(), vertices)
    }

    pub fn default_for(params: &BatteryParams, mode: Mode, temperature: f64) -> Result<Self> {
        Self::sample(params, mode, &Self::DEFAULT_SOC, &Self::DEFAULT_FRACTION, temperature)
    }

    /// Triangles containing vertex `v`.
    pub fn triangles_of(&self, v: usize) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&k| self.triangles[k].contains(&v))
            .collect()
    }

    /// Linear interpolation of internal power on triangle `k` at a terminal
    /// point, or `None` outside that triangle.
    pub fn interpolate_in(&self, k: usize, soc: f64, p_terminal: f64) -> Option<f64> {
        let [a, b, c] = self.triangles[k].map(|v| self.vertices[v]);
        if let Some(v) = [a, b, c].iter().find(|v| v.soc == soc && v.p_terminal == p_terminal) {
            return Some(v.p_internal);
        }
        let det = (b.soc - a.soc) * (c.p_terminal - a.p_terminal) - (c.soc - a.soc) * (b.p_terminal - a.p_terminal);
        if det.abs() < 1e-300 {
            return None;
        }
        let wb = ((soc - a.soc) * (c.p_terminal - a.p_terminal) - (c.soc - a.soc) * (p_terminal - a.p_terminal)) / det;
        let wc = ((b.soc - a.soc) * (p_terminal - a.p_terminal) - (soc - a.soc) * (b.p_terminal - a.p_terminal)) / det;
        let wa = 1.0 - wb - wc;
        let tol = -1e-9;
        (wa >= tol && wb >= tol && wc >= tol).then_some(wa * a.p_internal + wb * b.p_internal + wc * c.p_internal)
    }
}

/// Splits every cell of an `soc x power_fraction` grid along its
/// lower-left to upper-right diagonal.
pub fn triangle_partition(soc: &[f64], power_fraction: &[f64]) -> Result<Vec<[usize; 3]>> {
    for (name, axis) in [("soc", soc), ("power fraction", power_fraction)] {
        if axis.len() < 2 {
            return Err(Error::Model(format!("non-rectangular grid: {name} axis needs two breakpoints")));
        }
        if axis.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Model(format!("{name} breakpoints must be strictly increasing")));
        }
    }
    let np = power_fraction.len();
    let id = |i: usize, j: usize| i * np + j;
    let mut out = Vec::with_capacity(2 * (soc.len() - 1) * (np - 1));
    for i in 0..soc.len() - 1 {
        for j in 0..np - 1 {
            out.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            out.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatteryModel {
    Ideal(IdealBattery),
    Envelope { discharge: EnvelopeSet, charge: EnvelopeSet },
    Triangle { discharge: TriangleGrid, charge: TriangleGrid },
}

/// How one battery enters the dispatch model.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryFormulation {
    /// Energy that maps to SOC = 1; zero disables the battery.
    pub energy_capacity_wh: f64,
    pub model: BatteryModel,
}

impl BatteryFormulation {
    pub fn kind(&self) -> FormulationKind {
        match self.model {
            BatteryModel::Ideal(_) => FormulationKind::Ideal,
            BatteryModel::Envelope { .. } => FormulationKind::Envelope,
            BatteryModel::Triangle { .. } => FormulationKind::MilpTriangle,
        }
    }

    pub fn ideal(params: &BatteryParams) -> Self {
        BatteryFormulation {
            energy_capacity_wh: params.energy_capacity_wh,
            model: BatteryModel::Ideal(IdealBattery::from_params(params)),
        }
    }

    pub fn envelope(params: &BatteryParams, temperature: f64) -> Result<Self> {
        Self::envelope_with(params, temperature, &SamplingGrid::default_discharge(), &SamplingGrid::default_charge())
    }

    pub fn envelope_with(
        params: &BatteryParams,
        temperature: f64,
        discharge: &SamplingGrid,
        charge: &SamplingGrid,
    ) -> Result<Self> {
        Ok(BatteryFormulation {
            energy_capacity_wh: params.energy_capacity_wh,
            model: BatteryModel::Envelope {
                discharge: sample_surface(params, Mode::Discharge, discharge, temperature)?,
                charge: sample_surface(params, Mode::Charge, charge, temperature)?,
            },
        })
    }

    pub fn triangle(params: &BatteryParams, temperature: f64) -> Result<Self> {
        Ok(BatteryFormulation {
            energy_capacity_wh: params.energy_capacity_wh,
            model: BatteryModel::Triangle {
                discharge: TriangleGrid::default_for(params, Mode::Discharge, temperature)?,
                charge: TriangleGrid::default_for(params, Mode::Charge, temperature)?,
            },
        })
    }

    /// Default formulation of `kind` for a battery.
    pub fn for_kind(kind: FormulationKind, params: &BatteryParams, temperature: f64) -> Result<Self> {
        match kind {
            FormulationKind::Ideal => Ok(Self::ideal(params)),
            FormulationKind::Envelope => Self::envelope(params, temperature),
            FormulationKind::MilpTriangle => Self::triangle(params, temperature),
        }
    }

    pub fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if !(self.energy_capacity_wh >= 0.0 && self.energy_capacity_wh.is_finite()) {
            issues.push(format!("energy capacity must be finite and nonnegative, got {}", self.energy_capacity_wh));
        }
        match &self.model {
            BatteryModel::Ideal(b) => issues.extend(b.issues()),
            BatteryModel::Envelope { discharge, charge } => {
                for (expect, set) in [(Mode::Discharge, discharge), (Mode::Charge, charge)] {
                    if set.mode != expect {
                        issues.push(format!("{expect} envelope has mode {}", set.mode));
                    }
                    issues.extend(set.issues().into_iter().map(|i| format!("{expect} envelope: {i}")));
                }
            }
            BatteryModel::Triangle { discharge, charge } => {
                for (expect, grid) in [(Mode::Discharge, discharge), (Mode::Charge, charge)] {
                    if grid.mode != expect {
                        issues.push(format!("{expect} triangle grid has mode {}", grid.mode));
                    }
                }
            }
        }
        issues
    }
}
