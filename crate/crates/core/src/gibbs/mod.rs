//! Periodic-orbit Gibbs measures, pressure and the empirical constants `K`
//! and `L`.

mod estimates;
mod measure;
mod periodic;

pub(crate) use estimates::linear_part;
pub use estimates::{
    bowen_constant_estimate, bowen_property_check, gibbs_constant_estimate, gibbs_ratios, ratios_stabilize, stabilizes,
    stabilizes_increasing, sup_stabilizes, BowenPropertyEstimate, DepthStats, GibbsConstantEstimate, GibbsDiagnostics,
    SamplingOptions, TableEntry, BOWEN_SLACK, RESOLUTION_ATOMS, STABILIZATION_FACTOR,
};
pub use measure::{gibbs_measure, pressure_estimate, EmpiricalMeasure};
pub use periodic::{fixed_point_count, linear_periodic_points, periodic_points, PeriodicSet};
