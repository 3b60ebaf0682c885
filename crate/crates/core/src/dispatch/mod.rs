//! Network-constrained economic dispatch with ideal, convex-envelope or
//! triangle-method battery models.

mod build;
mod case;
mod formulation;
mod output;
mod solve;
mod testcase;

pub use build::{build_dispatch, BatteryColumns, BuildOptions, DispatchModel, Layout};
pub use case::{BatterySite, Generator, Line, NetworkCase, Node};
pub use formulation::{triangle_partition, BatteryFormulation, BatteryModel, FormulationKind, IdealBattery, TriangleGrid};
pub use output::{write_json, write_schedule, DispatchSummary};
pub use solve::{
    schedule_from_primal, solve_dispatch, verify_schedule, BatterySchedule, DispatchOptions, DispatchSchedule, Residuals, ScheduleStats,
    TriangleFixing,
};
pub use testcase::{make_testcase, TestCaseKind, TestCaseSpec};
