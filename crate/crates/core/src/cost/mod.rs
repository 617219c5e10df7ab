//! Analytical area / energy / latency estimates and budget checks.
//!
//! The formulas are an order-of-magnitude reconstruction from the hardware
//! inventory; compare ratios and trends, not absolute numbers.

mod estimate;
mod tech;

pub use estimate::{
    check_constraints, estimate, estimate_layers, lookup_area, schemes_for, Breakdown, Budget, ConstraintCheck, CostReport, Dimension,
};
pub use tech::{TechParams, TECH_KEYS, TECH_SCHEMA_VERSION};
