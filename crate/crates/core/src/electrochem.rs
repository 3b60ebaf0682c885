//! Steady-state equivalent circuit of a Li-ion cell stack.
//!
//! The circuit is an equilibrium-voltage source in series with ohmic,
//! charge-transfer and membrane-diffusion resistances. Every quantity is a
//! pure function of state of charge, temperature and (for the surface state
//! of charge and coulombic efficiency) current.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molar gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;
/// Faraday constant, C/mol.
pub const FARADAY: f64 = 96_485.332_12;
/// Molar fractions are clamped to `[EPS, 1 - EPS]` before logarithms,
/// powers or divisions.
pub const MOLAR_FRACTION_EPS: f64 = 1e-6;

/// Number of Redlich-Kister interaction terms per electrode.
pub const RK_TERMS: usize = 7;

/// Electrochemical constants and pack ratings.
///
/// Field names in the JSON representation follow the usual symbols
/// (`U_bat0`, `R_ohm_T`, ...). The gas and Faraday constants are built in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Free-form label; parameter files should say where their numbers come from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Reference equilibrium potential, V.
    #[serde(rename = "U_bat0")]
    pub u_bat0: f64,
    /// Anode interaction coefficients, J/mol.
    #[serde(rename = "A_and")]
    pub a_and: [f64; RK_TERMS],
    /// Cathode interaction coefficients, J/mol.
    #[serde(rename = "A_ctd")]
    pub a_ctd: [f64; RK_TERMS],
    #[serde(rename = "R_ohm_0")]
    pub r_ohm_0: f64,
    #[serde(rename = "R_ohm_T")]
    pub r_ohm_t: f64,
    #[serde(rename = "R_ohm_SOC")]
    pub r_ohm_soc: f64,
    /// Activation energy, kJ/mol.
    #[serde(rename = "E_A")]
    pub e_a: f64,
    /// Solid-electrolyte interface area, m^2.
    #[serde(rename = "A_SEI")]
    pub a_sei: f64,
    /// Reaction-rate constant, m/s.
    #[serde(rename = "k_0")]
    pub k_0: f64,
    #[serde(rename = "K_dif_mem")]
    pub k_dif_mem: f64,
    #[serde(rename = "b_dif_mem")]
    pub b_dif_mem: f64,
    #[serde(rename = "T0_dif_mem")]
    pub t0_dif_mem: f64,
    #[serde(rename = "K_dif_elec")]
    pub k_dif_elec: f64,
    #[serde(rename = "b_dif_elec")]
    pub b_dif_elec: f64,
    #[serde(rename = "T0_dif_elec")]
    pub t0_dif_elec: f64,
    pub eta_c0: f64,
    #[serde(rename = "eta_cT")]
    pub eta_ct: f64,
    pub eta_ci: f64,
    #[serde(rename = "capacity_Ah")]
    pub capacity_ah: f64,
    pub rated_voltage: f64,
    #[serde(rename = "energy_capacity_Wh")]
    pub energy_capacity_wh: f64,
    pub c_rate_dis: f64,
    pub c_rate_cha: f64,
    /// Operating temperature, K.
    #[serde(rename = "T_ref")]
    pub t_ref: f64,
}

/// Which diffusion resistance to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionPath {
    Membrane,
    Electrode,
}

/// A validated (soc, temperature, current) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub soc: f64,
    pub temperature: f64,
    pub current: f64,
}

impl OperatingPoint {
    pub fn new(soc: f64, temperature: f64, current: f64) -> Result<Self> {
        check_soc(soc)?;
        check_temperature(temperature)?;
        if !(current >= 0.0) || !current.is_finite() {
            return Err(Error::domain("current", current, "[0, inf)"));
        }
        Ok(Self {
            soc,
            temperature,
            current,
        })
    }
}

/// Every circuit element evaluated at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitState {
    pub equilibrium_voltage: f64,
    pub ohmic_resistance: f64,
    pub charge_transfer_resistance: f64,
    pub membrane_resistance: f64,
    pub total_resistance: f64,
    pub coulombic_efficiency: f64,
}

/// Anode and cathode molar fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MolarFractions {
    pub anode: f64,
    pub cathode: f64,
}

impl MolarFractions {
    /// True when either fraction sits on 0 or 1, where the Nernst and
    /// charge-transfer expressions are singular.
    pub fn at_boundary(&self) -> bool {
        [self.anode, self.cathode]
            .iter()
            .any(|&c| c <= 0.0 || c >= 1.0)
    }

    pub fn clamped(&self) -> Self {
        Self {
            anode: clamp_fraction(self.anode),
            cathode: clamp_fraction(self.cathode),
        }
    }
}

fn clamp_fraction(chi: f64) -> f64 {
    chi.clamp(MOLAR_FRACTION_EPS, 1.0 - MOLAR_FRACTION_EPS)
}

fn check_soc(soc: f64) -> Result<()> {
    if (0.0..=1.0).contains(&soc) {
        Ok(())
    } else {
        Err(Error::domain("soc", soc, "[0, 1]"))
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("temperature", t, "(0, inf) K"))
    }
}

/// Electrode molar fractions as a function of state of charge.
pub fn molar_fractions(soc: f64) -> Result<MolarFractions> {
    check_soc(soc)?;
    Ok(MolarFractions {
        anode: 0.083 + 0.917 * soc,
        cathode: 1.0 - 0.7 * soc,
    })
}

/// Non-ideal interaction voltage of one electrode, in volts.
///
/// Coefficients are in J/mol. The second bracket term carries
/// `(2 chi - 1)^(k - 2)` as a multiplication, so `chi = 0.5` needs no special
/// case: only the `k = 2` term survives there.
pub fn redlich_kister(chi: f64, coeffs: &[f64; RK_TERMS]) -> Result<f64> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::domain("molar fraction", chi, "(0, 1)"));
    }
    Ok(redlich_kister_unchecked(chi, coeffs))
}

fn redlich_kister_unchecked(chi: f64, coeffs: &[f64; RK_TERMS]) -> f64 {
    let u = 2.0 * chi - 1.0;
    let w = 2.0 * chi * (1.0 - chi);
    let mut sum = 0.0;
    // u^k and u^(k-2), advanced incrementally
    let mut u_k = 1.0;
    let mut u_km2 = 0.0;
    for (idx, &a) in coeffs.iter().enumerate() {
        let k = idx + 1;
        u_k *= u;
        u_km2 = match k {
            1 => 0.0,
            2 => 1.0,
            _ => u_km2 * u,
        };
        sum += a * (u_k - w * (k as f64 - 1.0) * u_km2);
    }
    sum / FARADAY
}

impl BatteryParams {
    /// The synthetic parameter set shipped with the crate.
    ///
    /// These are placeholder values chosen to give qualitatively realistic
    /// curves for a 40 Ah, 133 V pack. They are not measured data.
    pub fn synthetic_default() -> Self {
        serde_json::from_str(include_str!("../data/default_battery.json"))
            .expect("embedded battery parameters parse")
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and validates a parameter file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params = Self::from_json_str(&text).map_err(|e| Error::parse(path, e))?;
        let report = params.validate();
        if report.is_ok() {
            Ok(params)
        } else {
            Err(Error::Validation(report.issues))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// 1C current in amperes.
    pub fn nominal_current(&self) -> f64 {
        self.capacity_ah
    }

    /// Largest current either mode can ever request.
    pub fn admissible_current(&self) -> f64 {
        self.c_rate_dis.max(self.c_rate_cha) * self.nominal_current()
    }

    /// Checks every parameter invariant and reports all violations at once.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive("capacity_Ah", self.capacity_ah);
        positive("energy_capacity_Wh", self.energy_capacity_wh);
        positive("rated_voltage", self.rated_voltage);
        positive("c_rate_dis", self.c_rate_dis);
        positive("c_rate_cha", self.c_rate_cha);
        positive("T_ref", self.t_ref);
        positive("A_SEI", self.a_sei);
        positive("k_0", self.k_0);
        positive("K_dif_mem", self.k_dif_mem);
        positive("K_dif_elec", self.k_dif_elec);

        let scalars = [
            ("U_bat0", self.u_bat0),
            ("R_ohm_0", self.r_ohm_0),
            ("R_ohm_T", self.r_ohm_t),
            ("R_ohm_SOC", self.r_ohm_soc),
            ("E_A", self.e_a),
            ("b_dif_mem", self.b_dif_mem),
            ("T0_dif_mem", self.t0_dif_mem),
            ("b_dif_elec", self.b_dif_elec),
            ("T0_dif_elec", self.t0_dif_elec),
            ("eta_c0", self.eta_c0),
            ("eta_cT", self.eta_ct),
            ("eta_ci", self.eta_ci),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                issues.push(format!("{name} must be finite, got {v}"));
            }
        }
        for (name, coeffs) in [("A_and", &self.a_and), ("A_ctd", &self.a_ctd)] {
            if coeffs.iter().any(|c| !c.is_finite()) {
                issues.push(format!("{name} has non-finite entries"));
            }
        }

        if self.t_ref == self.t0_dif_mem {
            issues.push("T0_dif_mem equals T_ref (membrane diffusion is singular)".into());
        }
        if self.t_ref == self.t0_dif_elec {
            issues.push("T0_dif_elec equals T_ref (electrode diffusion is singular)".into());
        }

        if self.t_ref > 0.0 {
            // affine in soc: the endpoints decide positivity
            for soc in [0.0, 1.0] {
                let r = self.r_ohm_0 + self.r_ohm_t * self.t_ref + self.r_ohm_soc * soc;
                if !(r > 0.0) {
                    issues.push(format!(
                        "R_ohm is {r} at soc={soc}, T_ref={}; must be positive on [0, 1]",
                        self.t_ref
                    ));
                }
            }
            let i_max = self.admissible_current();
            if i_max.is_finite() {
                for i in [0.0, i_max] {
                    let eta = self.eta_c0 + self.eta_ct * self.t_ref + self.eta_ci * i;
                    if !(eta > 0.0 && eta <= 1.0) {
                        issues.push(format!(
                            "coulombic efficiency is {eta} at i={i} A; must lie in (0, 1] up to {i_max} A"
                        ));
                    }
                }
            }
        }
        ValidationReport { issues }
    }

    /// Equilibrium (open-circuit) voltage in volts.
    pub fn equilibrium_voltage(&self, soc: f64, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let chi = molar_fractions(soc)?.clamped();
        let arg = (1.0 - chi.cathode) * chi.anode / (chi.cathode * (1.0 - chi.anode));
        if !(arg > 0.0 && arg.is_finite()) {
            return Err(Error::Singularity {
                what: "equilibrium voltage",
                detail: format!("Nernst argument {arg} at soc={soc}"),
            });
        }
        let nernst = GAS_CONSTANT * temperature / FARADAY * arg.ln();
        let v_int = redlich_kister_unchecked(chi.cathode, &self.a_ctd)
            - redlich_kister_unchecked(chi.anode, &self.a_and);
        Ok(self.u_bat0 + nernst + v_int)
    }

    pub fn ohmic_resistance(&self, soc: f64, temperature: f64) -> Result<f64> {
        check_soc(soc)?;
        check_temperature(temperature)?;
        Ok(self.r_ohm_0 + self.r_ohm_t * temperature + self.r_ohm_soc * soc)
    }

    pub fn charge_transfer_resistance(&self, soc: f64, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let chi = molar_fractions(soc)?.clamped();
        let rt = GAS_CONSTANT * temperature;
        let activation = (self.e_a * 1e3 / rt).exp();
        let base = rt * activation / (FARADAY * FARADAY * self.a_sei * self.k_0);
        let r = base / (chi.anode * chi.cathode).sqrt();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Singularity {
                what: "charge-transfer resistance",
                detail: format!("value {r} at soc={soc}, T={temperature}"),
            });
        }
        Ok(r)
    }

    pub fn diffusion_resistance(&self, temperature: f64, path: DiffusionPath) -> Result<f64> {
        check_temperature(temperature)?;
        let (k, b, t0) = match path {
            DiffusionPath::Membrane => (self.k_dif_mem, self.b_dif_mem, self.t0_dif_mem),
            DiffusionPath::Electrode => (self.k_dif_elec, self.b_dif_elec, self.t0_dif_elec),
        };
        if temperature == t0 {
            return Err(Error::Singularity {
                what: "diffusion resistance",
                detail: format!("T equals T0 = {t0} K ({path:?})"),
            });
        }
        Ok(k * (b / (temperature - t0)).exp())
    }

    /// Series resistance seen by the terminal current.
    pub fn total_resistance(&self, soc: f64, temperature: f64) -> Result<f64> {
        Ok(self.ohmic_resistance(soc, temperature)?
            + self.charge_transfer_resistance(soc, temperature)?
            + self.diffusion_resistance(temperature, DiffusionPath::Membrane)?)
    }

    /// Coulombic efficiency at current magnitude `current` (A).
    pub fn coulombic_efficiency(&self, current: f64, temperature: f64) -> Result<f64> {
        if !(current >= 0.0) {
            return Err(Error::domain("current", current, "[0, inf)"));
        }
        check_temperature(temperature)?;
        Ok(self.eta_c0 + self.eta_ct * temperature + self.eta_ci * current)
    }

    /// State of charge seen at the electrode surface.
    ///
    /// `current` is signed: positive while discharging, negative while
    /// charging. The result is not clamped to `[0, 1]`.
    pub fn surface_soc(&self, soc: f64, current: f64, temperature: f64) -> Result<f64> {
        let r_elec = self.diffusion_resistance(temperature, DiffusionPath::Electrode)?;
        let eta_c = self.coulombic_efficiency(current.abs(), temperature)?;
        Ok(soc - r_elec * current * eta_c)
    }

    pub fn evaluate(&self, point: &OperatingPoint) -> Result<CircuitState> {
        let (soc, t) = (point.soc, point.temperature);
        let ohmic = self.ohmic_resistance(soc, t)?;
        let ct = self.charge_transfer_resistance(soc, t)?;
        let mem = self.diffusion_resistance(t, DiffusionPath::Membrane)?;
        Ok(CircuitState {
            equilibrium_voltage: self.equilibrium_voltage(soc, t)?,
            ohmic_resistance: ohmic,
            charge_transfer_resistance: ct,
            membrane_resistance: mem,
            total_resistance: ohmic + ct + mem,
            coulombic_efficiency: self.coulombic_efficiency(point.current, t)?,
        })
    }
}

/// Outcome of [`BatteryParams::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}
