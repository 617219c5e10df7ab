//! Sparsity-aware row mapping: activation statistics, criticality scores
//! and placement of coefficients by distance from the bit-line clamp.

mod eval;
mod plan;
mod score;
mod stats;
mod sweep;

pub use eval::{
    evaluate_mapping, evaluate_mapping_totals, improvement_factor, layer_scores, standard_plans, EvalTotals, MappingEval,
};
pub use plan::{assign_rows, nearest_first, reversed_plan, uniform_plan, MappingPlan, PlanKind};
pub use score::{score, CriticalityScore, ScoreParams};
pub use stats::{profile_channels, profile_stats, BasisAccumulator, BasisStats};
pub use sweep::{array_sweep, write_sweep_csv, SweepConfig, SweepRow};
