//! Synthetic desk-scale analog of a 24-bus reliability test system with one
//! battery. Topology and reactances follow the public 24-bus test system;
//! loads and ratings are scaled to a ~1.5 MW peak. Not measured data.

use serde::{Deserialize, Serialize};

use super::case::{BatterySite, Generator, Line, NetworkCase, Node};
use crate::electrochem::BatteryParams;

/// (from, to, reactance in per-unit on the system base, rating in MW).
const BRANCHES: [(u32, u32, f64, f64); 38] = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.192, 175.0),
    (3, 9, 0.119, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.049, 500.0),
    (15, 21, 0.049, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
];

/// (node, P_max kW, P_min kW, cost per kWh).
const UNITS: [(u32, f64, f64, f64); 10] = [
    (1, 76.0, 15.2, 16.0),
    (2, 76.0, 15.2, 16.1),
    (7, 100.0, 25.0, 43.661),
    (13, 197.0, 69.0, 48.58),
    (15, 155.0, 54.3, 12.3),
    (16, 155.0, 54.3, 12.4),
    (18, 400.0, 100.0, 4.4),
    (21, 400.0, 100.0, 4.4231),
    (22, 50.0, 10.0, 0.001),
    (23, 350.0, 140.0, 11.85),
];

/// Peak nodal loads of the original system in MW; they set the split of
/// the scaled profile across nodes.
const LOAD_SHARES: [(u32, f64); 17] = [
    (1, 108.0),
    (2, 97.0),
    (3, 180.0),
    (4, 74.0),
    (5, 71.0),
    (6, 136.0),
    (7, 125.0),
    (8, 171.0),
    (9, 175.0),
    (10, 195.0),
    (13, 265.0),
    (14, 194.0),
    (15, 317.0),
    (16, 100.0),
    (18, 333.0),
    (19, 181.0),
    (20, 128.0),
];

const SYSTEM_BASE_MVA: f64 = 100.0;
const ORIGINAL_PEAK_MW: f64 = 2850.0;
const REFERENCE_NODE: u32 = 13;
const BATTERY_NODE: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestCaseKind {
    /// ~1.0 MW night, ~1.5 MW peaks.
    Base,
    /// Deeper peaks, a 10 degC battery starting at 20 % energy.
    Stressed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCaseSpec {
    pub kind: TestCaseKind,
    pub steps: usize,
    pub time_step_h: f64,
    pub battery: BatteryParams,
}

impl TestCaseSpec {
    pub fn new(kind: TestCaseKind) -> Self {
        TestCaseSpec {
            kind,
            steps: 144,
            time_step_h: 1.0 / 6.0,
            battery: BatteryParams::synthetic_default(),
        }
    }
}

/// Two daily bumps, midday and evening, on a 24 h clock.
fn shape(h: f64) -> f64 {
    let bump = |center: f64, width: f64| {
        let d = (h - center).rem_euclid(24.0);
        let d = d.min(24.0 - d);
        (-0.5 * (d / width).powi(2)).exp()
    };
    0.8 * bump(12.5, 2.5) + bump(21.0, 1.6)
}

/// Total system load in W at hour-of-day `h`, spanning [low, high].
fn load_profile(kind: TestCaseKind, h: f64) -> f64 {
    let (low, high) = match kind {
        TestCaseKind::Base => (1.0e6, 1.5e6),
        TestCaseKind::Stressed => (0.95e6, 1.75e6),
    };
    let (lo, hi) = (0..2400)
        .map(|k| shape(k as f64 / 100.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    low + (high - low) * (shape(h) - lo) / (hi - lo)
}

pub fn make_testcase(spec: &TestCaseSpec) -> NetworkCase {
    let scale = 1.5e6 / (ORIGINAL_PEAK_MW * 1e6);
    let base_power_w = SYSTEM_BASE_MVA * 1e6 * scale;
    let nodes: Vec<Node> = (1..=24)
        .map(|id| Node {
            id,
            angle_min: -1.0,
            angle_max: 1.0,
            reference: id == REFERENCE_NODE,
        })
        .collect();
    let idx = |id: u32| (id - 1) as usize;
    let lines = BRANCHES
        .iter()
        .map(|&(f, t, x, rating)| Line {
            from: idx(f),
            to: idx(t),
            reactance: x,
            flow_limit_w: rating * 1e6 * scale,
        })
        .collect();
    let generators = UNITS
        .iter()
        .map(|&(n, pmax, pmin, cost)| Generator {
            node: idx(n),
            p_min_w: pmin * 1e3,
            p_max_w: pmax * 1e3,
            cost_per_wh: cost / 1e3,
        })
        .collect();
    let share_total: f64 = LOAD_SHARES.iter().map(|s| s.1).sum();
    let demand = (0..spec.steps)
        .map(|t| {
            let total = load_profile(spec.kind, t as f64 * spec.time_step_h);
            let mut row = vec![0.0; 24];
            for &(n, share) in &LOAD_SHARES {
                row[idx(n)] = total * share / share_total;
            }
            row
        })
        .collect();
    let mut site = BatterySite::new(idx(BATTERY_NODE), spec.battery.clone());
    if spec.kind == TestCaseKind::Stressed {
        site.initial_energy_wh = Some(0.2 * spec.battery.energy_capacity_wh);
        site.temperature = 283.15;
    }
    NetworkCase {
        name: match spec.kind {
            TestCaseKind::Base => "rts24-analog".into(),
            TestCaseKind::Stressed => "rts24-analog-stressed".into(),
        },
        base_power_w,
        time_step_h: spec.time_step_h,
        nodes,
        lines,
        generators,
        batteries: vec![site],
        demand,
    }
}
