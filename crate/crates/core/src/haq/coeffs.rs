use serde::{Deserialize, Serialize};

use crate::error::QuantError;
use crate::scalar::{round_half_even, Scalar};
use crate::spline::KanLayer;

/// Symmetric per-layer fixed-point coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedCoeffs {
    pub codes: Vec<i32>,
    pub scale: f64,
    pub bits: u32,
}

impl QuantizedCoeffs {
    pub fn max_code(bits: u32) -> i32 {
        (1i32 << (bits - 1)) - 1
    }

    pub fn dequantize(&self, idx: usize) -> f64 {
        self.codes[idx] as f64 * self.scale
    }

    /// Digital magnitude `|c'|_Q` of one coefficient.
    pub fn magnitude(&self, idx: usize) -> u32 {
        self.codes[idx].unsigned_abs()
    }
}

/// Quantize a flat coefficient slice: `scale = max|c| / (2^(b-1) - 1)`,
/// codes rounded half-to-even. An all-zero tensor gets `scale = 1`.
pub fn quantize_slice<T: Scalar>(coeffs: &[T], bits: u32) -> Result<QuantizedCoeffs, QuantError> {
    if !(2..=16).contains(&bits) {
        return Err(QuantError::Invalid(format!("coefficient width must be 2..=16, got {bits}")));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(QuantError::Invalid("non-finite coefficient".into()));
    }
    let qmax = QuantizedCoeffs::max_code(bits);
    let amax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.as_f64().abs()));
    let scale = if amax == 0.0 { 1.0 } else { amax / qmax as f64 };
    let codes = coeffs
        .iter()
        .map(|c| round_half_even(c.as_f64() / scale).clamp(-qmax as i64, qmax as i64) as i32)
        .collect();
    Ok(QuantizedCoeffs { codes, scale, bits })
}

pub fn quantize_coeffs<T: Scalar>(layer: &KanLayer<T>, bits: u32) -> Result<QuantizedCoeffs, QuantError> {
    quantize_slice(layer.coeffs(), bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_stay_zero_with_unit_scale() {
        let q = quantize_slice(&[0.0f64; 6], 8).unwrap();
        assert_eq!(q.codes, vec![0; 6]);
        assert_eq!(q.scale, 1.0);
    }

    #[test]
    fn unit_max_maps_to_127() {
        let q = quantize_slice(&[1.0f64, -0.5, 0.25], 8).unwrap();
        assert_eq!(q.scale, 1.0 / 127.0);
        assert_eq!(q.codes[0], 127);
        assert_eq!(q.codes[1], -64); // -63.5 rounds to even
    }

    proptest! {
        #[test]
        fn reconstruction_error_within_half_step(v in proptest::collection::vec(-50.0f64..50.0, 1..64), bits in 2u32..=12) {
            let q = quantize_slice(&v, bits).unwrap();
            for (i, &c) in v.iter().enumerate() {
                prop_assert!((q.dequantize(i) - c).abs() <= q.scale / 2.0 + 1e-12 * c.abs().max(1.0));
            }
        }
    }
}
