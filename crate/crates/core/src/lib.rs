//! Steady-state Li-ion characterization, convex-envelope linearization and
//! network-constrained battery dispatch.

pub mod characterization;
pub mod dispatch;
pub mod electrochem;
pub mod error;
pub mod optim;
pub mod reliability;

pub use characterization::{EnvelopeSample, EnvelopeSet, ErrorReport, Mode};
pub use dispatch::{BatteryFormulation, DispatchSchedule, FormulationKind, NetworkCase};
pub use electrochem::{BatteryParams, DiffusionPath, OperatingPoint};
pub use error::{Error, Result};
pub use optim::{LinearProgram, MixedIntegerProgram, Solution, SolverOptions, Status};
pub use reliability::RealizationReport;
