use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::limits::{efficiency, max_power, terminal_to_internal, Mode};
use crate::electrochem::BatteryParams;
use crate::error::{Error, Result};
use crate::optim::{LinearProgram, Sense, SimplexEngine, SolverOptions, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub soc: f64,
    #[serde(rename = "p_terminal_W")]
    pub p_terminal: f64,
    #[serde(rename = "p_internal_W")]
    pub p_internal: f64,
}

impl EnvelopeSample {
    pub const fn anchor(soc: f64) -> Self {
        EnvelopeSample {
            soc,
            p_terminal: 0.0,
            p_internal: 0.0,
        }
    }
}

/// SOC breakpoints and power levels, the latter as fractions of the maximum
/// power at each SOC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub soc: Vec<f64>,
    pub power_fraction: Vec<f64>,
}

impl SamplingGrid {
    /// 2 SOC levels x 6 powers + 2 anchors = 14 samples.
    pub fn default_discharge() -> Self {
        SamplingGrid {
            soc: vec![0.15, 1.0],
            power_fraction: sixths(),
        }
    }

    /// 3 SOC levels x 6 powers + 2 anchors = 20 samples.
    pub fn default_charge() -> Self {
        SamplingGrid {
            soc: vec![0.0, 0.8, 0.95],
            power_fraction: sixths(),
        }
    }

    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Discharge => Self::default_discharge(),
            Mode::Charge => Self::default_charge(),
        }
    }

    fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.soc.is_empty() || self.power_fraction.is_empty() {
            issues.push("sampling grids must be nonempty".to_string());
        }
        for (name, g) in [("soc", &self.soc), ("power fraction", &self.power_fraction)] {
            for &v in g.iter() {
                if !(0.0..=1.0).contains(&v) {
                    issues.push(format!("{name} grid value {v} outside [0, 1]"));
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

fn sixths() -> Vec<f64> {
    (1..=6).map(|k| k as f64 / 6.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingProvenance {
    pub grid: SamplingGrid,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_label: Option<String>,
    /// Free-form run metadata supplied by the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSet {
    pub mode: Mode,
    pub provenance: SamplingProvenance,
    pub samples: Vec<EnvelopeSample>,
}

impl EnvelopeSet {
    /// Invariant violations; an anchors-only set is reported as too small.
    pub fn issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for anchor in [EnvelopeSample::anchor(0.0), EnvelopeSample::anchor(1.0)] {
            if !self.samples.contains(&anchor) {
                issues.push(format!("missing anchor at soc {}", anchor.soc));
            }
        }
        if self.samples.len() < 3 {
            issues.push(format!("{} samples; at least 3 required", self.samples.len()));
        }
        for (k, s) in self.samples.iter().enumerate() {
            if self.samples[..k].contains(s) {
                issues.push(format!("duplicate sample {s:?}"));
            }
            if !(0.0..=1.0).contains(&s.soc) {
                issues.push(format!("sample {k} soc {} outside [0, 1]", s.soc));
            }
            if !(s.p_terminal >= 0.0 && s.p_internal >= 0.0) || !s.p_terminal.is_finite() || !s.p_internal.is_finite() {
                issues.push(format!("sample {k} has negative or non-finite power"));
            }
            let ordered = match self.mode {
                Mode::Discharge => s.p_internal >= s.p_terminal,
                Mode::Charge => s.p_internal <= s.p_terminal,
            };
            if !ordered {
                issues.push(format!("sample {k} violates the {} power ordering", self.mode));
            }
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn max_terminal_power(&self) -> f64 {
        self.samples.iter().map(|s| s.p_terminal).fold(0.0, f64::max)
    }
}

/// Samples the (soc, terminal power, internal power) surface on a grid.
pub fn sample_surface(
    params: &BatteryParams,
    mode: Mode,
    grid: &SamplingGrid,
    temperature: f64,
) -> Result<EnvelopeSet> {
    grid.check()?;
    let mut samples = vec![EnvelopeSample::anchor(0.0), EnvelopeSample::anchor(1.0)];
    for &soc in &grid.soc {
        let wrap = |fraction: f64| {
            move |e: Error| Error::Sampling {
                soc,
                fraction,
                source: Box::new(e),
            }
        };
        let pmax = max_power(params, soc, temperature, mode).map_err(wrap(f64::NAN))?.watts;
        for &fraction in &grid.power_fraction {
            let p = fraction * pmax;
            let conv = terminal_to_internal(params, soc, p, temperature, mode).map_err(wrap(fraction))?;
            samples.push(EnvelopeSample {
                soc,
                p_terminal: p,
                p_internal: conv.p_internal,
            });
        }
    }
    samples.sort_by(|a, b| {
        a.soc
            .total_cmp(&b.soc)
            .then(a.p_terminal.total_cmp(&b.p_terminal))
            .then(a.p_internal.total_cmp(&b.p_internal))
    });
    samples.dedup();
    Ok(EnvelopeSet {
        mode,
        provenance: SamplingProvenance {
            grid: grid.clone(),
            temperature,
            battery_label: params.label.clone(),
            run: None,
        },
        samples,
    })
}

/// Dense evaluation grid: `soc_points` evenly spaced SOCs on [0, 1], and at
/// each SOC the powers `k / power_points * max_power` for `k = 1..=power_points`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    pub soc_points: usize,
    pub power_points: usize,
}

impl Default for EvaluationGrid {
    fn default() -> Self {
        EvaluationGrid {
            soc_points: 100,
            power_points: 100,
        }
    }
}

impl EvaluationGrid {
    pub fn describe(&self) -> String {
        format!(
            "{} evenly spaced soc in [0,1] x power fractions k/{} for k=1..{} of max power",
            self.soc_points, self.power_points, self.power_points
        )
    }

    fn socs(&self) -> Vec<f64> {
        let n = self.soc_points;
        match n {
            0 => Vec::new(),
            1 => vec![0.5],
            _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub soc: f64,
    pub p_terminal: f64,
    pub exact: f64,
    /// `None` when the point lies outside the envelope's hull.
    pub envelope: Option<f64>,
}

impl PointError {
    pub fn relative(&self) -> Option<f64> {
        self.envelope.map(|e| (e - self.exact).abs() / self.exact)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mode: Mode,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub std_rel_error: f64,
    pub n_samples: usize,
    pub n_outside_hull: usize,
    pub evaluation_grid: String,
}

impl ErrorReport {
    pub fn from_points(mode: Mode, points: &[PointError], grid: &str) -> Self {
        let errs: Vec<f64> = points.iter().filter_map(PointError::relative).collect();
        let n = errs.len();
        let (max, mean, std) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let mean = errs.iter().sum::<f64>() / n as f64;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
            (errs.iter().cloned().fold(0.0, f64::max), mean, var.sqrt())
        };
        ErrorReport {
            mode,
            max_rel_error: max,
            mean_rel_error: mean,
            std_rel_error: std,
            n_samples: n,
            n_outside_hull: points.len() - n,
            evaluation_grid: grid.to_string(),
        }
    }
}

/// Interpolates internal power from the envelope's hull at `(soc, p_terminal)`:
/// the smallest value for discharge, the largest for charge.
pub struct HullInterpolator<'a> {
    envelope: &'a EnvelopeSet,
    opts: SolverOptions,
}

impl<'a> HullInterpolator<'a> {
    pub fn new(envelope: &'a EnvelopeSet) -> Self {
        HullInterpolator {
            envelope,
            opts: SolverOptions::default(),
        }
    }

    pub fn interpolate(&self, soc: f64, p_terminal: f64) -> Result<Option<f64>> {
        let sign = match self.envelope.mode {
            Mode::Discharge => 1.0,
            Mode::Charge => -1.0,
        };
        // scale powers so the three rows are of similar magnitude
        let scale = self.envelope.max_terminal_power().max(1.0);
        let mut lp = LinearProgram::new("hull");
        let w: Vec<usize> = self
            .envelope
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| lp.add_variable(format!("w{k}"), 0.0, f64::INFINITY, sign * s.p_internal / scale))
            .collect();
        let row = |f: &dyn Fn(&EnvelopeSample) -> f64| {
            w.iter()
                .zip(&self.envelope.samples)
                .map(|(&j, s)| (j, f(s)))
                .collect::<Vec<_>>()
        };
        lp.add_constraint("soc", row(&|s| s.soc), Sense::Eq, soc);
        lp.add_constraint("power", row(&|s| s.p_terminal / scale), Sense::Eq, p_terminal / scale);
        lp.add_constraint("convex", row(&|_| 1.0), Sense::Eq, 1.0);
        let sol = SimplexEngine::new(&lp, self.opts.clone())?.solve();
        match sol.status {
            Status::Optimal => Ok(Some(sign * sol.objective * scale)),
            Status::Infeasible => Ok(None),
            other => Err(Error::Solver {
                status: other.to_string(),
            }),
        }
    }
}

/// Exact and interpolated internal power at every evaluation point with
/// positive terminal power.
pub fn envelope_points(
    envelope: &EnvelopeSet,
    params: &BatteryParams,
    temperature: f64,
    grid: &EvaluationGrid,
) -> Result<Vec<PointError>> {
    let hull = HullInterpolator::new(envelope);
    let mode = envelope.mode;
    let mut out = Vec::new();
    for soc in grid.socs() {
        let pmax = max_power(params, soc, temperature, mode)?.watts;
        for k in 1..=grid.power_points {
            let p = k as f64 / grid.power_points as f64 * pmax;
            if p <= 0.0 {
                continue;
            }
            let exact = terminal_to_internal(params, soc, p, temperature, mode)?.p_internal;
            out.push(PointError {
                soc,
                p_terminal: p,
                exact,
                envelope: hull.interpolate(soc, p)?,
            });
        }
    }
    Ok(out)
}

pub fn envelope_error(
    envelope: &EnvelopeSet,
    params: &BatteryParams,
    temperature: f64,
    grid: &EvaluationGrid,
) -> Result<ErrorReport> {
    let points = envelope_points(envelope, params, temperature, grid)?;
    Ok(ErrorReport::from_points(envelope.mode, &points, &grid.describe()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub soc: f64,
    pub p_terminal: f64,
    pub p_internal: f64,
    pub efficiency: f64,
}

/// Dense dump of the characteristic surface for plotting.
pub fn surface_table(
    params: &BatteryParams,
    mode: Mode,
    soc_points: usize,
    power_points: usize,
    temperature: f64,
) -> Result<Vec<SurfacePoint>> {
    let mut rows = Vec::new();
    let grid = EvaluationGrid {
        soc_points,
        power_points,
    };
    for soc in grid.socs() {
        let pmax = max_power(params, soc, temperature, mode)?.watts;
        for k in 0..=power_points {
            let p = k as f64 / power_points.max(1) as f64 * pmax;
            let conv = terminal_to_internal(params, soc, p, temperature, mode)?;
            rows.push(SurfacePoint {
                soc,
                p_terminal: p,
                p_internal: conv.p_internal,
                efficiency: efficiency(params, soc, conv.current, temperature, mode)?,
            });
        }
    }
    Ok(rows)
}

/// Writes `#`-prefixed header lines followed by CSV rows.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[String], rows: &[T]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for line in header {
        writeln!(file, "# {line}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(io)
}
