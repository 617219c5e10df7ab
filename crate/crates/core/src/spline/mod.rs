//! Floating-point B-spline and KAN layer mathematics.
//!
//! This is the reference every quantized or analog path is checked against.

mod basis;
pub mod checkpoint;
mod dataset;
mod extend;
mod layer;
mod model;
mod train;

pub use basis::{uniform_pieces, ActiveBasis, BSplineSpec};
pub use dataset::{Dataset, Split};
pub use extend::{grid_extend, refit_grid, regrid_model, RIDGE, SAMPLES_PER_INTERVAL};
pub use layer::{layer_forward, BaseActivation, DomainPolicy, KanLayer};
pub use model::{Gradients, KanModel, LossKind};
pub use train::{evaluate, split_views, train, EpochLoss, TrainConfig, TrainError, TrainOutcome, Trainer};
