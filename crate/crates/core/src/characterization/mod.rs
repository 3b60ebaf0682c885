//! SOC-dependent current and power limits, efficiencies, and convex
//! envelopes of the sampled characteristic surfaces.

pub mod envelope;
pub mod limits;

pub use envelope::{
    envelope_error, envelope_points, sample_surface, surface_table, EnvelopeSample, EnvelopeSet, ErrorReport,
    write_csv_with_header, EvaluationGrid, HullInterpolator, PointError, SamplingGrid, SamplingProvenance, SurfacePoint,
};
pub use limits::{
    current_limits, efficiency, max_charge_current, max_current, max_discharge_current, max_power,
    terminal_to_internal, CurrentLimit, CurrentLimits, Mode, PowerConversion, PowerLimit,
};
