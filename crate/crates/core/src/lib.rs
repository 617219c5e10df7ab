//! Co-design toolkit for Kolmogorov–Arnold networks on analog
//! compute-in-memory hardware.
//!
//! * [`spline`]: exact B-spline / KAN math, training and grid extension.
//! * [`haq`]: knot-aligned power-of-two input quantization and the shared
//!   hemi lookup table.
//! * [`cim`]: behavioral crossbar with bit-line IR drop and word-line input
//!   encoders.
//! * [`sam`]: activation-statistics driven row mapping.
//! * [`cost`]: analytical area / energy / latency roll-up.
//! * [`tune`]: sensitivity-based grid assignment and the constrained
//!   grid-extension loop.
//!
//! The spline math is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which everything downstream uses.

pub mod cim;
pub mod cost;
pub mod error;
pub mod haq;
pub mod linalg;
pub mod rng;
pub mod sam;
pub mod scalar;
pub mod spline;
pub mod tune;

pub use scalar::Scalar;

pub type Spec = spline::BSplineSpec<f64>;
pub type Layer = spline::KanLayer<f64>;
pub type Model = spline::KanModel<f64>;
pub type Data = spline::Dataset<f64>;

pub type SpecF32 = spline::BSplineSpec<f32>;
pub type LayerF32 = spline::KanLayer<f32>;
pub type ModelF32 = spline::KanModel<f32>;
