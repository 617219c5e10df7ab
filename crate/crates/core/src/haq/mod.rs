//! Knot-aligned input quantization with a shared hemi lookup table.

mod coeffs;
mod infer;
mod lut;
mod resources;
mod scheme;

pub use coeffs::{quantize_coeffs, quantize_slice, QuantizedCoeffs};
pub use infer::LutLayer;
pub use lut::{build_sh_lut, lut_lookup, quantize_value, stored_len, LutHit, ShLut};
pub use resources::{count_resources, lut_reduction_ratio, MuxGroup, MuxKind, ResourceCount};
pub use scheme::{solve_l, solve_ld, QuantMode, QuantScheme};
