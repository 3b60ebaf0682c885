//! Fixtures shared by the benchmarks.

use battdispatch_core::dispatch::{make_testcase, TestCaseKind, TestCaseSpec};
use battdispatch_core::{BatteryFormulation, FormulationKind, NetworkCase};

/// The generated 24-bus case cut to `steps` time steps.
pub fn rts24(steps: usize) -> NetworkCase {
    make_testcase(&TestCaseSpec::new(TestCaseKind::Base)).truncated(steps)
}

pub fn formulations(case: &NetworkCase, kind: FormulationKind) -> Vec<BatteryFormulation> {
    case.batteries
        .iter()
        .map(|b| BatteryFormulation::for_kind(kind, &b.params, b.temperature).expect("default battery formulates"))
        .collect()
}
