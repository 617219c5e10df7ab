//! Sensitivity-driven grid assignment and the budgeted grid-extension loop.

mod driver;
mod sensitivity;

pub use driver::{
    resume, trace_jsonl, tune, Decision, Hardware, TraceRecord, TuneConfig, TuneError, TuneOutcome, TuneState,
    TuneStatus,
};
pub use sensitivity::{
    assign_grids, classify, profile_sensitivity, GridTemplates, Sensitivity, SensitivityProfile,
};
